#include "wtal/corpus/feature_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "wtal/errors.hpp"

namespace wtal::corpus {

static_assert(std::endian::native == std::endian::little, "WTF1 I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'W', 'T', 'F', '1'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("WTF1: truncated while reading ") + what + ": expected " + std::to_string(n) +
                            " bytes, found " + std::to_string(bytes_.size() - pos_),
                        pos_);
    }
  }

  std::size_t pos() const { return pos_; }
  const char* cursor() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

std::vector<double> read_floats(Reader& in, std::size_t count, const char* what) {
  in.need(count * sizeof(float), what);
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    float f;
    std::memcpy(&f, in.cursor() + i * sizeof(float), sizeof(float));
    out[i] = static_cast<double>(f);
  }
  in.skip(count * sizeof(float));
  return out;
}

}  // namespace

void write_feature_file(const std::filesystem::path& path, const VideoSample& video) {
  video.validate();
  Writer out;
  out.raw(kMagic, 4);
  const auto t_len = static_cast<std::uint32_t>(video.length());
  out.put<std::uint32_t>(t_len);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(video.rgb.dim(1)));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(video.flow.dim(1)));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(video.label.size()));
  out.put<std::uint8_t>(video.gt_intervals.empty() ? 0 : 1);
  out.put<float>(static_cast<float>(video.seconds_per_segment));
  for (double v : video.rgb.data()) out.put<float>(static_cast<float>(v));
  for (double v : video.flow.data()) out.put<float>(static_cast<float>(v));
  for (auto l : video.label) out.put<std::uint8_t>(l ? 1 : 0);
  if (!video.gt_intervals.empty()) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(video.gt_intervals.size()));
    for (const auto& g : video.gt_intervals) {
      out.put<std::uint32_t>(static_cast<std::uint32_t>(g.cls));
      out.put<float>(static_cast<float>(g.start_seg));
      out.put<float>(static_cast<float>(g.end_seg));
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw PathError("cannot write feature file " + path.string());
  file.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!file) throw PathError("write failed for " + path.string());
}

VideoSample load_feature_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw PathError("cannot open feature file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  Reader in(bytes);

  in.need(4, "magic");
  if (std::memcmp(in.cursor(), kMagic, 4) != 0) throw FormatError("WTF1: bad magic", 0);
  in.skip(4);
  const auto t_len = in.get<std::uint32_t>("T");
  const auto d_rgb = in.get<std::uint32_t>("D_rgb");
  const auto d_flow = in.get<std::uint32_t>("D_flow");
  const auto num_classes = in.get<std::uint32_t>("C");
  if (t_len == 0) throw FormatError("WTF1: header T=0", 4);
  if (d_rgb == 0 || d_flow == 0) throw FormatError("WTF1: zero feature dimension", 8);
  if (num_classes == 0) throw FormatError("WTF1: header C=0", 16);
  const std::size_t flag_at = in.pos();
  const auto has_gt = in.get<std::uint8_t>("has_gt");
  if (has_gt > 1) throw FormatError("WTF1: has_gt must be 0 or 1", flag_at);
  const float sps = in.get<float>("seconds_per_segment");

  VideoSample video;
  video.id = path.stem().string();
  video.seconds_per_segment = static_cast<double>(sps);
  video.rgb = nn::Tensor::from({t_len, d_rgb}, read_floats(in, std::size_t{t_len} * d_rgb, "RGB payload"));
  video.flow = nn::Tensor::from({t_len, d_flow}, read_floats(in, std::size_t{t_len} * d_flow, "flow payload"));
  in.need(num_classes, "label");
  video.label.assign(reinterpret_cast<const std::uint8_t*>(in.cursor()),
                     reinterpret_cast<const std::uint8_t*>(in.cursor()) + num_classes);
  in.skip(num_classes);
  if (has_gt) {
    const auto n_gt = in.get<std::uint32_t>("n_gt");
    in.need(std::size_t{n_gt} * 12, "ground-truth intervals");
    for (std::uint32_t i = 0; i < n_gt; ++i) {
      GtInterval g;
      g.cls = static_cast<int>(in.get<std::uint32_t>("gt class"));
      g.start_seg = static_cast<double>(in.get<float>("gt start"));
      g.end_seg = static_cast<double>(in.get<float>("gt end"));
      video.gt_intervals.push_back(g);
    }
  }
  try {
    video.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("WTF1: ") + e.what(), in.pos());
  }
  return video;
}

}  // namespace wtal::corpus
