#include "wtal/model/model.hpp"

namespace wtal::model {

Rng stream_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

Model Model::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng ksm_rng = stream_rng(seed, Stream::kInitKsm);
  Rng csr_rng = stream_rng(seed, Stream::kInitCsr);
  Model m;
  m.config = config;
  m.ksm = KsmParams::init(config, ksm_rng);
  m.head = LocHeadParams::init(config, ksm_rng);
  m.csr = CsrParams::init(config, csr_rng);
  return m;
}

ParamList Model::match_group() const {
  ParamList out = ksm.parameters();
  for (auto& p : head.parameters()) out.push_back(std::move(p));
  return out;
}

ParamList Model::parameters() const {
  ParamList out = match_group();
  for (auto& p : rec_group()) out.push_back(std::move(p));
  return out;
}

}  // namespace wtal::model
