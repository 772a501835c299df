#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kanwm/error.hpp"
#include "kanwm/numeric.hpp"
#include "kanwm/rng.hpp"

namespace kanwm {

enum class TaskKind { classification, regression };
enum class SplitTag { train, test, holdout };

// Inputs live in [-1, 1]. Classification rows carry `labels`, regression
// rows carry `targets`.
struct Dataset {
  Mat inputs;
  TaskKind task = TaskKind::classification;
  std::vector<int> labels;
  std::vector<double> targets;
  SplitTag split = SplitTag::train;
  std::size_t image_rows = 0;  // nonzero for image data
  std::size_t image_cols = 0;

  std::size_t size() const noexcept { return inputs.rows(); }
  std::size_t dim() const noexcept { return inputs.cols(); }
  bool empty() const noexcept { return inputs.rows() == 0; }

  Dataset subset(std::span<const std::size_t> indices) const;
  Dataset head(std::size_t n) const;
  // Targets as an [n x 1] matrix (regression only).
  Mat target_matrix() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---- IDX (MNIST / Fashion-MNIST distribution format) ----

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

enum class IdxErrorCode { io, bad_magic, truncated, count_mismatch, bad_label };

class IdxError : public Error {
 public:
  IdxError(IdxErrorCode code, const std::string& what) : Error(ErrorKind::data, what), code_(code) {}
  IdxErrorCode code() const noexcept { return code_; }

 private:
  IdxErrorCode code_;
};

// Pixels map p -> 2 p / 255 - 1.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels);

struct IdxBytes {
  std::vector<std::uint8_t> images;
  std::vector<std::uint8_t> labels;
};

// Inverse of parse_idx for image datasets; pixels are re-quantized with
// round((x + 1) * 255 / 2).
IdxBytes encode_idx(const Dataset& data);
void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels);

// Non-overlapping factor x factor mean pooling of image rows.
Dataset avg_pool(const Dataset& data, std::size_t factor);

// ---- Feynman regression sets ----

struct FeynmanFormula {
  std::string id;
  std::string expression;
  std::size_t arity = 0;
  double (*evaluate)(std::span<const double>) = nullptr;
  // Smallest |denominator| at a point; nullptr when the formula has none.
  double (*denominator)(std::span<const double>) = nullptr;
};

const std::vector<FeynmanFormula>& feynman_registry();
const FeynmanFormula& find_feynman(std::string_view id);

inline constexpr double kSingularityMargin = 1e-6;

// Inputs uniform on (-1, 1)^arity; draws with |denominator| < 1e-6 are redrawn.
Dataset gen_feynman(const FeynmanFormula& formula, std::size_t n, std::uint64_t seed);

// ---- Splits and batching ----

struct Splits {
  Dataset train;
  Dataset test;
  Dataset holdout;
};

// Seeded shuffle, then contiguous train/test/holdout slices of
// floor(f * n) rows (holdout takes the remainder).
Splits split_dataset(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed);

// Reshuffled index batches, one call per epoch.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t rows, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> next_epoch();

 private:
  std::size_t rows_;
  std::size_t batch_size_;
  Rng rng_;
};

}  // namespace kanwm
