#include "wtal/corpus/descriptions.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "wtal/errors.hpp"

namespace wtal::corpus {

std::atomic<std::uint64_t> DescriptionGenerator::calls_{0};

Tokens tokenize(std::string_view sentence) {
  Tokens out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && (cur.back() == '\'' || cur.back() == '-')) cur.pop_back();
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : sentence) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if ((ch == '\'' || ch == '-') && !cur.empty()) {
      cur.push_back(ch);
    } else if (c >= 0x80) {
      cur.push_back(ch);  // keep UTF-8 bytes intact
    } else {
      flush();
    }
  }
  flush();
  return out;
}

namespace {

// Built-in table: key sentence, detailed sentence, action verbs.
const ClassDescription kBuiltin[] = {
    {"BaseballPitch", "A pitcher throws the baseball toward the batter.",
     "The pitcher stands on the mound, lifts his leg, winds his arm back and throws the ball hard toward the "
     "catcher behind home plate.",
     {"throws", "lifts", "winds"}},
    {"BasketballDunk", "A player jumps and dunks the basketball into the hoop.",
     "The player dribbles toward the basket, leaps off both feet, rises above the rim and slams the ball down "
     "through the hoop with one hand.",
     {"dunks", "jumps", "dribbles", "leaps", "rises", "slams"}},
    {"Billiards", "A player strikes the cue ball across the table.",
     "The player leans over the green table, aims the cue stick carefully and strikes the white ball so that it "
     "knocks a colored ball into a pocket.",
     {"strikes", "leans", "aims", "knocks"}},
    {"CleanAndJerk", "An athlete lifts a heavy barbell overhead.",
     "The athlete grips the barbell, pulls it from the floor to the shoulders, dips the knees and drives the "
     "weight up to lock the arms overhead.",
     {"lifts", "grips", "pulls", "dips", "drives"}},
    {"CliffDiving", "A diver jumps off a high cliff into the water.",
     "The diver stands at the edge of a rocky cliff, springs into the air, twists through several turns and "
     "plunges feet first into the sea below.",
     {"jumps", "springs", "twists", "plunges"}},
    {"CricketBowling", "A bowler runs in and delivers the cricket ball.",
     "The bowler sprints along the pitch, jumps into the crease, swings the straight arm over the head and "
     "releases the ball toward the stumps.",
     {"runs", "delivers", "sprints", "swings", "releases"}},
    {"CricketShot", "A batsman swings the bat at the cricket ball.",
     "The batsman watches the incoming ball, steps forward with the front foot and swings the bat to drive the "
     "ball away across the field.",
     {"swings", "watches", "steps", "drive"}},
    {"Diving", "A diver jumps from the board and enters the pool.",
     "The diver bounces on the springboard, launches upward, tucks and rotates in the air and then enters the "
     "pool with a small splash.",
     {"jumps", "enters", "bounces", "launches", "tucks", "rotates"}},
    {"FrisbeeCatch", "A person runs and catches a flying frisbee.",
     "The person tracks the spinning disc across the park, sprints after it, stretches out an arm and catches "
     "the frisbee before it lands.",
     {"runs", "catches", "tracks", "sprints", "stretches"}},
    {"GolfSwing", "A golfer swings the club and hits the ball.",
     "The golfer addresses the ball, turns the shoulders in a slow backswing, swings the club down and hits the "
     "ball far along the fairway.",
     {"swings", "hits", "addresses", "turns"}},
    {"HammerThrow", "An athlete spins and throws the hammer.",
     "The athlete swings the heavy ball on its wire around the head, spins several times inside the circle and "
     "releases the hammer into the field.",
     {"spins", "throws", "swings", "releases"}},
    {"HighJump", "An athlete runs up and jumps over the high bar.",
     "The athlete runs a curved approach, plants the outside foot, jumps upward and arches the back over the bar "
     "before landing on the mat.",
     {"runs", "jumps", "plants", "arches", "landing"}},
    {"JavelinThrow", "An athlete runs and throws the javelin.",
     "The athlete carries the javelin above the shoulder, runs down the track, plants the front leg and hurls "
     "the spear high into the air.",
     {"runs", "throws", "carries", "plants", "hurls"}},
    {"LongJump", "An athlete sprints and leaps into the sand pit.",
     "The athlete sprints down the runway, hits the take-off board, leaps forward with the arms swinging and "
     "lands feet first in the sand pit.",
     {"sprints", "leaps", "hits", "swinging", "lands"}},
    {"PoleVault", "An athlete vaults over the bar with a pole.",
     "The athlete runs holding the long pole, plants it in the box, bends it while rising and vaults over the "
     "high bar before falling onto the mat.",
     {"vaults", "runs", "plants", "bends", "rising", "falling"}},
    {"Shotput", "An athlete pushes the heavy shot forward.",
     "The athlete holds the metal shot against the neck, glides across the circle, turns the hips and pushes "
     "the shot out into the field.",
     {"pushes", "holds", "glides", "turns"}},
    {"SoccerPenalty", "A player kicks the ball from the penalty spot.",
     "The player places the ball on the penalty spot, steps back, runs forward and kicks the ball past the "
     "diving goalkeeper into the net.",
     {"kicks", "places", "steps", "runs"}},
    {"TennisSwing", "A player swings the racket to hit the ball.",
     "The player moves toward the bouncing ball, turns the body, swings the racket forward and hits the tennis "
     "ball back over the net.",
     {"swings", "hit", "moves", "turns", "hits"}},
    {"ThrowDiscus", "An athlete spins and throws the discus.",
     "The athlete holds the flat discus in one hand, spins around inside the circle and throws the disc far "
     "across the field with a long arm.",
     {"spins", "throws", "holds"}},
    {"VolleyballSpiking", "A player jumps and spikes the volleyball.",
     "The player approaches the net, jumps high with both arms raised and spikes the ball down hard into the "
     "court of the other team.",
     {"jumps", "spikes", "approaches", "raised"}},
};

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

DescriptionTable::DescriptionTable(std::vector<ClassDescription> entries) : entries_(std::move(entries)) {
  for (auto& e : entries_) {
    if (e.name.empty()) throw FormatError("description table: empty class name");
    for (auto& v : e.verbs) std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  }
}

DescriptionTable DescriptionTable::builtin(std::size_t num_classes) {
  constexpr std::size_t kAvailable = std::size(kBuiltin);
  if (num_classes < 1 || num_classes > kAvailable) {
    throw ConfigError("built-in description table has " + std::to_string(kAvailable) + " classes, requested " +
                      std::to_string(num_classes));
  }
  return DescriptionTable(std::vector<ClassDescription>(kBuiltin, kBuiltin + num_classes));
}

DescriptionTable DescriptionTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open description table " + path.string());
  std::vector<ClassDescription> entries;
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 4) {
      throw FormatError("description table: expected 4 tab-separated fields, got " + std::to_string(fields.size()),
                        line_start);
    }
    ClassDescription d{fields[0], fields[1], fields[2], {}};
    for (auto& v : split(fields[3], ',')) {
      auto t = tokenize(v);
      if (!t.empty()) d.verbs.push_back(t.front());
    }
    entries.push_back(std::move(d));
  }
  return DescriptionTable(std::move(entries));
}

void DescriptionTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PathError("cannot write description table " + path.string());
  for (const auto& e : entries_) {
    out << e.name << '\t' << e.key_sentence << '\t' << e.complete_sentence << '\t' << join(e.verbs, ',') << '\n';
  }
}

const ClassDescription& DescriptionTable::at(int cls) const {
  if (cls < 0 || static_cast<std::size_t>(cls) >= entries_.size()) {
    throw ArgumentError("unknown class id " + std::to_string(cls));
  }
  return entries_[static_cast<std::size_t>(cls)];
}

std::vector<std::string> DescriptionTable::class_names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

int DescriptionTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return static_cast<int>(i);
  return -1;
}

Tokens DescriptionGenerator::describe_key(const VideoSample& video, int cls) {
  return describe(video, cls, DescriptionMode::kKey);
}

Tokens DescriptionGenerator::describe_complete(const VideoSample& video, int cls) {
  return describe(video, cls, DescriptionMode::kComplete);
}

Tokens DescriptionGenerator::describe(const VideoSample& video, int cls, DescriptionMode mode) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= video.label.size() || !video.label[cls]) {
    throw ArgumentError("class " + std::to_string(cls) + " is not present in the label of " + video.id);
  }
  calls_.fetch_add(1, std::memory_order_relaxed);
  return tokenize(generate(video, cls, mode));
}

std::uint64_t DescriptionGenerator::call_count() { return calls_.load(std::memory_order_relaxed); }

void DescriptionGenerator::reset_call_count() { calls_.store(0, std::memory_order_relaxed); }

std::string TemplateDescriber::generate(const VideoSample&, int cls, DescriptionMode mode) {
  const auto& entry = table_.at(cls);
  return mode == DescriptionMode::kKey ? entry.key_sentence : entry.complete_sentence;
}

}  // namespace wtal::corpus
