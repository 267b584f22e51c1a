#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "zsncd/entropy.hpp"
#include "zsncd/layers.hpp"

namespace zsncd {

enum class Variant : std::uint32_t { kConv = 0, kMlp = 1 };

const char* to_string(Variant v);
Variant parse_variant(const std::string& name);

struct CodecConfig {
  Variant variant = Variant::kConv;
  std::size_t k = 8;
  std::size_t channels = 1;
  /// Hidden width; 0 selects 128 (conv) or 1024 (MLP).
  std::size_t hidden = 0;
  std::size_t kernel = 3;
};

/// Encoder, decoder and entropy model for one patch size.
///
/// Conv: stride-2 convolutions with GDN shrink k x k to 1 x 1 x n_b
/// (n_b = 16 gray, 32 rgb); the decoder mirrors it with transposed
/// convolutions and IGDN. MLP: k*k*C -> 1024 -> 1024 -> 16 with ReLU.
/// Patches are batched as [B, k, k, C].
template <typename T>
class CodecModel {
 public:
  CodecModel() = default;
  CodecModel(const CodecConfig& config, std::uint64_t seed);

  const CodecConfig& config() const noexcept { return config_; }
  std::size_t bottleneck() const noexcept { return bottleneck_; }
  Shape patch_shape(std::size_t batch) const { return {batch, config_.k, config_.k, config_.channels}; }
  /// [B, 1, 1, n_b] for conv, [B, n_b] for MLP.
  Shape latent_shape(std::size_t batch) const;

  Tensor<T> encode(const Tensor<T>& patches, Tape<T>* tape = nullptr) const;
  Tensor<T> decode(const Tensor<T>& latent, Tape<T>* tape = nullptr) const;

  Sequential<T>& encoder() noexcept { return encoder_; }
  Sequential<T>& decoder() noexcept { return decoder_; }
  FactorizedDensity<T>& density() noexcept { return density_; }
  const FactorizedDensity<T>& density() const noexcept { return density_; }

  /// Encoder, decoder, then density parameters, in a fixed order.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  CodecConfig config_;
  std::size_t bottleneck_ = 0;
  Sequential<T> encoder_;
  Sequential<T> decoder_;
  FactorizedDensity<T> density_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout: "ZNCD", then u32 version, variant, k, channels, tensor
/// count; per tensor u32 rank, u32 dims, f32 values; trailing CRC-32 of
/// every preceding byte. All integers and floats little-endian.
template <typename T>
void save_checkpoint(const CodecModel<T>& model, const std::filesystem::path& path);

template <typename T>
CodecModel<T> load_checkpoint(const std::filesystem::path& path);

/// Bitwise equality of every parameter value.
template <typename T>
bool same_parameters(const CodecModel<T>& a, const CodecModel<T>& b);

}  // namespace zsncd
