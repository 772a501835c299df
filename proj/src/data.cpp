#include "kanwm/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

namespace kanwm {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.inputs = inputs.gather_rows(indices);
  out.task = task;
  out.split = split;
  out.image_rows = image_rows;
  out.image_cols = image_cols;
  if (!labels.empty()) {
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
  }
  if (!targets.empty()) {
    out.targets.reserve(indices.size());
    for (auto i : indices) out.targets.push_back(targets[i]);
  }
  return out;
}

Dataset Dataset::head(std::size_t n) const {
  std::vector<std::size_t> idx(std::min(n, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

Mat Dataset::target_matrix() const {
  require(task == TaskKind::regression, ErrorKind::invalid_argument,
          "target_matrix: dataset is not a regression set");
  return Mat(targets.size(), 1, targets);
}

// ---------------------------------------------------------------- IDX

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IdxError(IdxErrorCode::io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IdxError(IdxErrorCode::io, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IdxError(IdxErrorCode::io, "short write to " + p.string());
}

}  // namespace

Dataset parse_idx(std::span<const std::uint8_t> images, std::span<const std::uint8_t> labels) {
  if (images.size() < 4 || labels.size() < 4) {
    throw IdxError(IdxErrorCode::truncated, "idx: file shorter than its magic number");
  }
  if (read_be32(images, 0) != kIdxImageMagic) {
    throw IdxError(IdxErrorCode::bad_magic, "idx: image file magic is not 0x00000803");
  }
  if (read_be32(labels, 0) != kIdxLabelMagic) {
    throw IdxError(IdxErrorCode::bad_magic, "idx: label file magic is not 0x00000801");
  }
  if (images.size() < 16) throw IdxError(IdxErrorCode::truncated, "idx: image header truncated");
  if (labels.size() < 8) throw IdxError(IdxErrorCode::truncated, "idx: label header truncated");

  const std::size_t count = read_be32(images, 4);
  const std::size_t rows = read_be32(images, 8);
  const std::size_t cols = read_be32(images, 12);
  const std::size_t label_count = read_be32(labels, 4);
  const std::size_t dim = rows * cols;
  if (images.size() - 16 < count * dim) {
    throw IdxError(IdxErrorCode::truncated, "idx: image payload truncated");
  }
  if (labels.size() - 8 < label_count) {
    throw IdxError(IdxErrorCode::truncated, "idx: label payload truncated");
  }
  if (count != label_count) {
    throw IdxError(IdxErrorCode::count_mismatch,
                   "idx: " + std::to_string(count) + " images but " +
                       std::to_string(label_count) + " labels");
  }

  Dataset d;
  d.task = TaskKind::classification;
  d.image_rows = rows;
  d.image_cols = cols;
  d.inputs = Mat(count, dim);
  auto v = d.inputs.values();
  for (std::size_t k = 0; k < count * dim; ++k) {
    v[k] = 2.0 * (static_cast<double>(images[16 + k]) / 255.0) - 1.0;
  }
  d.labels.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    const int y = labels[8 + k];
    if (y > 9) throw IdxError(IdxErrorCode::bad_label, "idx: label " + std::to_string(y) + " > 9");
    d.labels[k] = y;
  }
  return d;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_file(images);
  const auto lab = read_file(labels);
  return parse_idx(img, lab);
}

IdxBytes encode_idx(const Dataset& data) {
  require(data.task == TaskKind::classification && data.image_rows * data.image_cols == data.dim() &&
              data.dim() > 0,
          ErrorKind::invalid_argument, "encode_idx: dataset is not an image set");
  IdxBytes out;
  write_be32(out.images, kIdxImageMagic);
  write_be32(out.images, static_cast<std::uint32_t>(data.size()));
  write_be32(out.images, static_cast<std::uint32_t>(data.image_rows));
  write_be32(out.images, static_cast<std::uint32_t>(data.image_cols));
  for (double x : data.inputs.values()) {
    const double p = std::round((x + 1.0) * 255.0 / 2.0);
    out.images.push_back(static_cast<std::uint8_t>(std::clamp(p, 0.0, 255.0)));
  }
  write_be32(out.labels, kIdxLabelMagic);
  write_be32(out.labels, static_cast<std::uint32_t>(data.size()));
  for (int y : data.labels) out.labels.push_back(static_cast<std::uint8_t>(y));
  return out;
}

void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels) {
  const IdxBytes b = encode_idx(data);
  write_file(images, b.images);
  write_file(labels, b.labels);
}

Dataset avg_pool(const Dataset& data, std::size_t factor) {
  require(factor >= 1 && data.image_rows % factor == 0 && data.image_cols % factor == 0 &&
              data.image_rows * data.image_cols == data.dim(),
          ErrorKind::invalid_argument, "avg_pool: image size not divisible by factor");
  if (factor == 1) return data;
  Dataset out = data;
  const std::size_t r2 = data.image_rows / factor;
  const std::size_t c2 = data.image_cols / factor;
  out.image_rows = r2;
  out.image_cols = c2;
  out.inputs = Mat(data.size(), r2 * c2);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t n = 0; n < data.size(); ++n) {
    auto src = data.inputs.row(n);
    auto dst = out.inputs.row(n);
    for (std::size_t r = 0; r < r2; ++r) {
      for (std::size_t c = 0; c < c2; ++c) {
        double acc = 0.0;
        for (std::size_t dr = 0; dr < factor; ++dr) {
          for (std::size_t dc = 0; dc < factor; ++dc) {
            acc += src[(r * factor + dr) * data.image_cols + c * factor + dc];
          }
        }
        dst[r * c2 + c] = acc * inv;
      }
    }
  }
  return out;
}

// ------------------------------------------------------------ Feynman

namespace {

using std::numbers::pi;
using V = std::span<const double>;

double sq(double x) { return x * x; }

const std::vector<FeynmanFormula> kRegistry = {
    {"I.6.2", "exp(-t^2/(2 s^2)) / sqrt(2 pi s^2)", 2,
     [](V v) { return std::exp(-sq(v[0]) / (2 * sq(v[1]))) / std::sqrt(2 * pi * sq(v[1])); },
     [](V v) { return std::abs(v[1]); }},
    {"I.6.2b", "exp(-(t-t1)^2/(2 s^2)) / sqrt(2 pi s^2)", 3,
     [](V v) {
       return std::exp(-sq(v[0] - v[1]) / (2 * sq(v[2]))) / std::sqrt(2 * pi * sq(v[2]));
     },
     [](V v) { return std::abs(v[2]); }},
    {"I.9.18", "a / ((b-1)^2 + (c-d)^2 + (e-f)^2)", 6,
     [](V v) { return v[0] / (sq(v[1] - 1) + sq(v[2] - v[3]) + sq(v[4] - v[5])); },
     [](V v) { return sq(v[1] - 1) + sq(v[2] - v[3]) + sq(v[4] - v[5]); }},
    {"I.12.11", "1 + a sin(t)", 2, [](V v) { return 1 + v[0] * std::sin(v[1]); }, nullptr},
    {"I.13.12", "a (1/b - 1)", 2, [](V v) { return v[0] * (1 / v[1] - 1); },
     [](V v) { return std::abs(v[1]); }},
    {"I.15.3x", "(1 - a) / sqrt(1 - b^2)", 2,
     [](V v) { return (1 - v[0]) / std::sqrt(1 - sq(v[1])); },
     [](V v) { return std::sqrt(1 - sq(v[1])); }},
    {"I.16.6", "(a + b) / (1 + a b)", 2, [](V v) { return (v[0] + v[1]) / (1 + v[0] * v[1]); },
     [](V v) { return std::abs(1 + v[0] * v[1]); }},
    {"I.18.4", "(1 + a b) / (1 + a)", 2, [](V v) { return (1 + v[0] * v[1]) / (1 + v[0]); },
     [](V v) { return std::abs(1 + v[0]); }},
    {"I.26.2", "arcsin(n sin(t2))", 2, [](V v) { return std::asin(v[0] * std::sin(v[1])); },
     nullptr},
    {"I.27.2", "1 / (1 + a b)", 2, [](V v) { return 1 / (1 + v[0] * v[1]); },
     [](V v) { return std::abs(1 + v[0] * v[1]); }},
    {"I.29.16", "sqrt(1 + a^2 - 2 a cos(t1 - t2))", 3,
     [](V v) { return std::sqrt(1 + sq(v[0]) - 2 * v[0] * std::cos(v[1] - v[2])); }, nullptr},
    {"I.30.3", "sin^2(n t/2) / sin^2(t/2)", 2,
     [](V v) { return sq(std::sin(v[0] * v[1] / 2)) / sq(std::sin(v[1] / 2)); },
     [](V v) { return sq(std::sin(v[1] / 2)); }},
    {"I.40.1", "n0 exp(-a)", 2, [](V v) { return v[0] * std::exp(-v[1]); }, nullptr},
    {"I.50.26", "cos(a) + a cos^2(a)", 2,
     [](V v) { return std::cos(v[0]) + v[0] * sq(std::cos(v[0])); }, nullptr},
    {"II.2.42", "(a - 1) b", 2, [](V v) { return (v[0] - 1) * v[1]; }, nullptr},
    {"II.6.15a", "c sqrt(a^2 + b^2) / (4 pi)", 3,
     [](V v) { return v[2] * std::sqrt(sq(v[0]) + sq(v[1])) / (4 * pi); }, nullptr},
    {"II.11.7", "n0 (1 + a cos(t))", 3, [](V v) { return v[0] * (1 + v[1] * std::cos(v[2])); },
     nullptr},
    {"II.11.27", "n a / (1 - n a / 3)", 2,
     [](V v) { return v[0] * v[1] / (1 - v[0] * v[1] / 3); },
     [](V v) { return std::abs(1 - v[0] * v[1] / 3); }},
    {"II.35.18", "n0 / (exp(a) + exp(-a))", 2,
     [](V v) { return v[0] / (std::exp(v[1]) + std::exp(-v[1])); },
     [](V v) { return std::exp(v[1]) + std::exp(-v[1]); }},
    {"II.36.38", "a + alpha b", 3, [](V v) { return v[0] + v[1] * v[2]; }, nullptr},
    {"II.38.3", "a / b", 2, [](V v) { return v[0] / v[1]; }, [](V v) { return std::abs(v[1]); }},
    {"III.9.52", "a sin^2((b-c)/2) / ((b-c)/2)^2", 3,
     [](V v) { return v[0] * sq(std::sin((v[1] - v[2]) / 2)) / sq((v[1] - v[2]) / 2); },
     [](V v) { return sq((v[1] - v[2]) / 2); }},
    {"III.10.19", "sqrt(1 + a^2 + b^2)", 2,
     [](V v) { return std::sqrt(1 + sq(v[0]) + sq(v[1])); }, nullptr},
    {"III.17.37", "beta (1 + alpha cos(t))", 3,
     [](V v) { return v[1] * (1 + v[0] * std::cos(v[2])); }, nullptr},
};

}  // namespace

const std::vector<FeynmanFormula>& feynman_registry() { return kRegistry; }

const FeynmanFormula& find_feynman(std::string_view id) {
  for (const auto& f : kRegistry) {
    if (f.id == id) return f;
  }
  fail(ErrorKind::config, "unknown Feynman formula id '" + std::string(id) + "'");
}

Dataset gen_feynman(const FeynmanFormula& formula, std::size_t n, std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "gen_feynman: n must be >= 1");
  Rng rng(seed);
  Dataset d;
  d.task = TaskKind::regression;
  d.inputs = Mat(n, formula.arity);
  d.targets.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = d.inputs.row(r);
    for (;;) {
      for (double& x : row) x = rng.uniform(-1.0, 1.0);
      if (formula.denominator && formula.denominator(row) < kSingularityMargin) continue;
      break;
    }
    d.targets[r] = formula.evaluate(row);
  }
  return d;
}

// ------------------------------------------------------ splits/batches

Splits split_dataset(const Dataset& data, std::array<double, 3> fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    require(f >= 0.0 && f <= 1.0, ErrorKind::invalid_argument, "split: fraction outside [0, 1]");
    sum += f;
  }
  require(std::abs(sum - 1.0) < 1e-9, ErrorKind::invalid_argument, "split: fractions must sum to 1");
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  const std::size_t n_train = pruned_count(fractions[0], n);
  const std::size_t n_test = std::min(pruned_count(fractions[1], n), n - n_train);
  const std::size_t n_hold = n - n_train - n_test;
  const std::array<std::size_t, 3> sizes{n_train, n_test, n_hold};
  for (std::size_t s = 0; s < 3; ++s) {
    require(fractions[s] == 0.0 || sizes[s] > 0, ErrorKind::data,
            "split: a split with a positive fraction came out empty");
  }
  std::span<const std::size_t> all(order);
  Splits out{data.subset(all.subspan(0, n_train)), data.subset(all.subspan(n_train, n_test)),
             data.subset(all.subspan(n_train + n_test))};
  out.train.split = SplitTag::train;
  out.test.split = SplitTag::test;
  out.holdout.split = SplitTag::holdout;
  return out;
}

BatchSchedule::BatchSchedule(std::size_t rows, std::size_t batch_size, std::uint64_t seed)
    : rows_(rows), batch_size_(batch_size), rng_(seed) {
  require(batch_size >= 1, ErrorKind::invalid_argument, "batch size must be >= 1");
}

std::vector<std::vector<std::size_t>> BatchSchedule::next_epoch() {
  std::vector<std::size_t> order(rows_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng_.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < rows_; start += batch_size_) {
    const std::size_t end = std::min(rows_, start + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace kanwm
