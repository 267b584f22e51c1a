#include "zsncd/codec.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace zsncd {

const char* to_string(Variant v) { return v == Variant::kConv ? "conv" : "mlp"; }

Variant parse_variant(const std::string& name) {
  if (name == "conv") return Variant::kConv;
  if (name == "mlp") return Variant::kMlp;
  throw Error(ErrorCode::kInvalidArgument, "unknown variant '" + name + "' (expected conv or mlp)");
}

namespace {

std::size_t default_hidden(Variant v) { return v == Variant::kConv ? 128 : 1024; }

}  // namespace

template <typename T>
CodecModel<T>::CodecModel(const CodecConfig& config, std::uint64_t seed) : config_(config) {
  if (config.k != 8 && config.k != 16) {
    throw Error(ErrorCode::kInvalidArgument, "patch size must be 8 or 16, got " + std::to_string(config.k));
  }
  if (config.channels != 1 && config.channels != 3) {
    throw Error(ErrorCode::kInvalidArgument, "channels must be 1 or 3, got " + std::to_string(config.channels));
  }
  if (config_.hidden == 0) config_.hidden = default_hidden(config.variant);
  if (config_.kernel == 0 || config_.kernel % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument, "kernel size must be odd");
  }
  Rng rng(seed, 0x636f646563ULL);
  const std::size_t c = config.channels, h = config_.hidden, k = config.k;

  if (config.variant == Variant::kMlp) {
    bottleneck_ = 16;
    const std::size_t in = k * k * c;
    encoder_.add(std::make_unique<Dense<T>>(in, h, rng));
    encoder_.add(std::make_unique<Relu<T>>());
    encoder_.add(std::make_unique<Dense<T>>(h, h, rng));
    encoder_.add(std::make_unique<Relu<T>>());
    encoder_.add(std::make_unique<Dense<T>>(h, bottleneck_, rng));
    decoder_.add(std::make_unique<Dense<T>>(bottleneck_, h, rng));
    decoder_.add(std::make_unique<Relu<T>>());
    decoder_.add(std::make_unique<Dense<T>>(h, h, rng));
    decoder_.add(std::make_unique<Relu<T>>());
    decoder_.add(std::make_unique<Dense<T>>(h, in, rng));
  } else {
    bottleneck_ = c == 1 ? 16 : 32;
    const std::size_t ks = config_.kernel, pad = ks / 2;
    const std::size_t stages = k == 8 ? 3 : 4;
    std::size_t in = c;
    for (std::size_t s = 0; s < stages; ++s) {
      const std::size_t out = s + 1 == stages ? bottleneck_ : h;
      encoder_.add(std::make_unique<Conv2d<T>>(in, out, ks, 2, pad, rng));
      if (s + 1 < stages) encoder_.add(std::make_unique<Gdn<T>>(out, false));
      in = out;
    }
    for (std::size_t s = 0; s < stages; ++s) {
      const std::size_t out = s + 1 == stages ? c : h;
      decoder_.add(std::make_unique<ConvTranspose2d<T>>(in, out, ks, 2, pad, 1, rng));
      if (s + 1 < stages) decoder_.add(std::make_unique<Gdn<T>>(out, true));
      in = out;
    }
  }
  density_ = FactorizedDensity<T>(bottleneck_, rng);
}

template <typename T>
Shape CodecModel<T>::latent_shape(std::size_t batch) const {
  if (config_.variant == Variant::kMlp) return {batch, bottleneck_};
  return {batch, 1, 1, bottleneck_};
}

template <typename T>
Tensor<T> CodecModel<T>::encode(const Tensor<T>& patches, Tape<T>* tape) const {
  if (patches.rank() != 4 || patches.shape() != patch_shape(patches.dim(0))) {
    throw Error(ErrorCode::kShapeMismatch, "encoder expects " + shape_string(patch_shape(0)) +
                                               " patches with any batch, got " + shape_string(patches.shape()));
  }
  if (config_.variant == Variant::kMlp) {
    Tensor<T> flat = patches;
    flat.reshape({patches.dim(0), patches.size() / patches.dim(0)});
    return encoder_.forward(flat, tape);
  }
  return encoder_.forward(patches, tape);
}

template <typename T>
Tensor<T> CodecModel<T>::decode(const Tensor<T>& latent, Tape<T>* tape) const {
  if (latent.rank() == 0 || latent.shape() != latent_shape(latent.dim(0))) {
    throw Error(ErrorCode::kShapeMismatch, "decoder expects latent " + shape_string(latent_shape(0)) +
                                               " with any batch, got " + shape_string(latent.shape()));
  }
  Tensor<T> out = decoder_.forward(latent, tape);
  out.reshape(patch_shape(latent.dim(0)));
  return out;
}

template <typename T>
std::vector<Parameter<T>*> CodecModel<T>::parameters() {
  auto out = encoder_.parameters();
  for (auto* p : decoder_.parameters()) out.push_back(p);
  for (auto& p : density_.parameters()) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> CodecModel<T>::parameters() const {
  auto out = encoder_.parameters();
  for (const auto* p : decoder_.parameters()) out.push_back(p);
  for (const auto& p : density_.parameters()) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t CodecModel<T>::parameter_count() const {
  return encoder_.parameter_count() + decoder_.parameter_count() + density_.parameter_count();
}

template <typename T>
void CodecModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

// ---- checkpoint ----

namespace {

constexpr char kMagic[4] = {'Z', 'N', 'C', 'D'};

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t crc_of(const unsigned char* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::size_t end) : buf_(buf), end_(end) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw Error(ErrorCode::kTruncatedCheckpoint, "checkpoint is truncated");
  }
  std::size_t pos() const { return pos_; }
  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

 private:
  const std::vector<unsigned char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

struct Record {
  Shape shape;
  std::size_t offset;
};

}  // namespace

template <typename T>
void save_checkpoint(const CodecModel<T>& model, const std::filesystem::path& path) {
  std::vector<unsigned char> buf(std::begin(kMagic), std::end(kMagic));
  const auto& cfg = model.config();
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<std::uint32_t>(cfg.variant));
  put_u32(buf, static_cast<std::uint32_t>(cfg.k));
  put_u32(buf, static_cast<std::uint32_t>(cfg.channels));
  const auto params = model.parameters();
  put_u32(buf, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(buf, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) put_u32(buf, static_cast<std::uint32_t>(d));
    for (T v : p->value.values()) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  put_u32(buf, crc_of(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

template <typename T>
CodecModel<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "'" + path.string() + "' is not a checkpoint (bad magic)");
  }
  Reader r(buf, buf.size());
  r.skip(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(ErrorCode::kVersionMismatch, "checkpoint version " + std::to_string(version) + " is not supported");
  }
  CodecConfig cfg;
  const std::uint32_t variant = r.u32();
  cfg.k = r.u32();
  cfg.channels = r.u32();
  const std::uint32_t count = r.u32();

  std::vector<Record> records;
  for (std::uint32_t t = 0; t < count; ++t) {
    Record rec;
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw Error(ErrorCode::kTruncatedCheckpoint, "checkpoint tensor header is corrupt");
    for (std::uint32_t d = 0; d < rank; ++d) rec.shape.push_back(r.u32());
    rec.offset = r.pos();
    const std::size_t n = shape_size(rec.shape);
    if (n > buf.size()) throw Error(ErrorCode::kTruncatedCheckpoint, "checkpoint is truncated");
    r.skip(4 * n);
    records.push_back(std::move(rec));
  }
  const std::size_t body = r.pos();
  const std::uint32_t stored = r.u32();
  if (crc_of(buf.data(), body) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, "checkpoint CRC-32 does not match its contents");
  }
  if (variant > 1) throw Error(ErrorCode::kShapeMismatch, "unknown variant tag in checkpoint");
  cfg.variant = static_cast<Variant>(variant);
  if (records.empty() || records[0].shape.size() != 2) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint does not describe a codec");
  }
  cfg.hidden = records[0].shape[1];
  if (cfg.variant == Variant::kConv && cfg.channels > 0) {
    cfg.kernel = static_cast<std::size_t>(std::lround(std::sqrt(double(records[0].shape[0]) / double(cfg.channels))));
  }

  CodecModel<T> model(cfg, 0);
  auto params = model.parameters();
  if (params.size() != records.size()) {
    throw Error(ErrorCode::kShapeMismatch, "checkpoint holds " + std::to_string(records.size()) +
                                               " tensors, architecture needs " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.shape() != records[i].shape) {
      throw Error(ErrorCode::kShapeMismatch, "checkpoint tensor " + std::to_string(i) + " has shape " +
                                                 shape_string(records[i].shape) + ", expected " +
                                                 shape_string(params[i]->value.shape()));
    }
    const unsigned char* src = buf.data() + records[i].offset;
    for (std::size_t j = 0; j < params[i]->value.size(); ++j, src += 4) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(src[b]) << (8 * b);
      params[i]->value[j] = static_cast<T>(std::bit_cast<float>(bits));
    }
  }
  return model;
}

template <typename T>
bool same_parameters(const CodecModel<T>& a, const CodecModel<T>& b) {
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->value.shape() != pb[i]->value.shape()) return false;
    if (std::memcmp(pa[i]->value.data(), pb[i]->value.data(), sizeof(T) * pa[i]->value.size()) != 0) return false;
  }
  return true;
}

template class CodecModel<float>;
template class CodecModel<double>;
template void save_checkpoint(const CodecModel<float>&, const std::filesystem::path&);
template void save_checkpoint(const CodecModel<double>&, const std::filesystem::path&);
template CodecModel<float> load_checkpoint<float>(const std::filesystem::path&);
template CodecModel<double> load_checkpoint<double>(const std::filesystem::path&);
template bool same_parameters(const CodecModel<float>&, const CodecModel<float>&);
template bool same_parameters(const CodecModel<double>&, const CodecModel<double>&);

}  // namespace zsncd
