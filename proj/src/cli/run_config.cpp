#include <openssl/evp.h>

#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <type_traits>

#include "options.hpp"
#include "wtal/cli/commands.hpp"
#include "wtal/errors.hpp"

namespace wtal::cli {

namespace {

std::string toml_value(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(ch);
    }
  }
  return out + "\"";
}

std::string toml_value(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string toml_value(bool b) { return b ? "true" : "false"; }

template <class T>
  requires std::is_integral_v<T>
std::string toml_value(T x) {
  return std::to_string(x);
}

template <class T>
std::string toml_value(const std::vector<T>& xs) {
  std::string out = "[";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    out += toml_value(xs[i]);
  }
  return out + "]";
}

}  // namespace

train::TrainConfig RunConfig::resolved_train() const {
  train::TrainConfig t = train;
  t.psi_mode = train::parse_psi_mode(psi);
  t.validate();
  return t;
}

std::string canonical_config(const RunConfig& config) {
  RunConfig copy = config;
  std::string out = "[" + config.command + "]\n";
  detail::visit_options(copy, config.command, [&](const char* name, auto& field, const char*) {
    out += name;
    out += " = ";
    out += toml_value(field);
    out += '\n';
  });
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::filesystem::path run_root(const RunConfig& config) {
  if (!config.run_root.empty()) return config.run_root;
  if (const char* env = std::getenv("WTAL_RUN_ROOT"); env && *env) return env;
  return "runs";
}

std::filesystem::path run_directory(const RunConfig& config) {
  const std::string hash = sha256_hex(config.command + "\n" + canonical_config(config));
  return run_root(config) / (config.command + "-" + hash.substr(0, 12));
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Weakly-supervised temporal action localisation with description priors"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with a [command] section, e.g. config.toml from a run directory");
  std::map<std::string, RunConfig> configs;
  const std::map<std::string, std::string> summaries = {
      {"gen-data", "write a synthetic corpus (WTF1 features, description table, manifest)"},
      {"train", "train a model and write metrics.jsonl and checkpoints"},
      {"eval", "evaluate a checkpoint on the test split"},
      {"gradcheck", "compare autodiff gradients with finite differences for every registered op"},
      {"ablate", "train and evaluate the four component rows over several seeds"},
  };
  for (const char* name : detail::kCommands) {
    RunConfig& cfg = configs[name];
    cfg.command = name;
    CLI::App* sub = app.add_subcommand(name, summaries.at(name));
    sub->configurable();
    detail::visit_options(cfg, name, [&](const char* option, auto& field, const char* description) {
      using Field = std::remove_reference_t<decltype(field)>;
      if constexpr (std::is_same_v<Field, bool>) {
        sub->add_flag(std::string("--") + option, field, description)->capture_default_str();
      } else {
        sub->add_option(std::string("--") + option, field, description)->capture_default_str();
      }
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (const char* name : detail::kCommands) {
      if (!app.got_subcommand(name)) continue;
      const RunConfig& cfg = configs.at(name);
      CommandResult result;
      if (cfg.command == "gen-data") result = cmd_gen_data(cfg, std::cerr);
      else if (cfg.command == "train") result = cmd_train(cfg, std::cerr);
      else if (cfg.command == "eval") result = cmd_eval(cfg, std::cerr);
      else if (cfg.command == "gradcheck") result = cmd_gradcheck(cfg, std::cerr);
      else result = cmd_ablate(cfg, std::cerr);
      std::cout << result.run_dir.string() << '\n';
      return result.ok ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace wtal::cli
