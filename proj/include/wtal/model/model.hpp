#pragma once

#include <cstdint>

#include "wtal/model/config.hpp"
#include "wtal/model/csr.hpp"
#include "wtal/model/ksm.hpp"
#include "wtal/model/lochead.hpp"

namespace wtal::model {

// Independent generator for one purpose (initialisation of a branch, data
// order, dropout, masking), derived from the run seed.
enum class Stream : std::uint64_t { kInitKsm = 1, kInitCsr = 2, kData = 3, kDropout = 4, kMask = 5 };
Rng stream_rng(std::uint64_t seed, Stream stream);

struct Model {
  ModelConfig config;
  KsmParams ksm;
  LocHeadParams head;
  CsrParams csr;

  // KSM and the head draw from one stream, CSR from another, so either
  // branch's initial weights do not depend on the other's widths.
  static Model init(const ModelConfig& config, std::uint64_t seed);

  ParamList parameters() const;
  // KSM branch (video embedding, attention, text encoder) plus the head.
  ParamList match_group() const;
  ParamList rec_group() const { return csr.parameters(); }
};

}  // namespace wtal::model
