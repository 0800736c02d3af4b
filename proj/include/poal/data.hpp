#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "poal/error.hpp"
#include "poal/text.hpp"

namespace poal {

inline constexpr int kOodLabel = -1;

// Dense feature matrix with integer labels. Labels are in [0, k_classes) for
// in-distribution rows and kOodLabel for out-of-distribution rows.
struct Dataset {
  Eigen::MatrixXd features;
  std::vector<int> labels;
  int k_classes = 0;
  // Original label text of each class, indexed by the 0-based label.
  std::vector<std::string> class_names;
  std::string name;

  std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
  std::size_t dims() const { return static_cast<std::size_t>(features.cols()); }
  bool is_ood(std::size_t row) const { return labels[row] == kOodLabel; }

  std::size_t count_ood() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kOodLabel));
  }

  void validate() const {
    if (features.cols() < 1) throw UsageError("dataset must have at least one feature column");
    if (labels.size() != rows()) throw UsageError("dataset label count does not match row count");
    if (k_classes < 1) throw UsageError("dataset must have at least one ID class");
    std::vector<std::size_t> per_class(static_cast<std::size_t>(k_classes), 0);
    for (int y : labels) {
      if (y == kOodLabel) continue;
      if (y < 0 || y >= k_classes) throw UsageError("label " + std::to_string(y) + " out of range");
      ++per_class[static_cast<std::size_t>(y)];
    }
    for (std::size_t k = 0; k < per_class.size(); ++k)
      if (per_class[k] == 0) throw UsageError("ID class " + std::to_string(k) + " has no rows");
    if (!features.allFinite()) throw NumericError("dataset contains non-finite features");
  }
};

namespace detail {

// Numeric labels compare by value ("+1" == "1" == "1.0"), anything else by text.
inline std::string canonical_label(std::string_view token) {
  if (auto v = text::parse_real(token)) {
    if (*v == 0.0) return "0";
    return text::format_real(*v);
  }
  return std::string(token);
}

inline bool label_less(const std::string& a, const std::string& b) {
  const auto va = text::parse_real(a);
  const auto vb = text::parse_real(b);
  if (va && vb) return *va < *vb;
  if (va != vb) return va.has_value(); // numeric labels sort first
  return a < b;
}

// Builds contiguous 0-based labels from raw tokens in sorted original-label order.
inline void assign_labels(Dataset& ds, const std::vector<std::string>& raw) {
  std::vector<std::string> names(raw.begin(), raw.end());
  std::sort(names.begin(), names.end(), label_less);
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < names.size(); ++i) index.emplace(names[i], static_cast<int>(i));
  ds.labels.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) ds.labels[i] = index.at(raw[i]);
  ds.class_names = std::move(names);
  ds.k_classes = static_cast<int>(ds.class_names.size());
}

} // namespace detail

// ---------------------------------------------------------------------------
// LIBSVM text format
// ---------------------------------------------------------------------------

// Parses `<label> <idx>:<val> ...` lines (1-based, strictly increasing
// indices). Absent entries are zero; d is the largest index seen. Labels are
// remapped to 0..K-1 in sorted original-label order; `class_names` holds the
// mapping.
inline Dataset parse_libsvm(std::istream& in, std::string name = "libsvm") {
  struct Row {
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::vector<std::string> raw_labels;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto tokens = text::split_ws(body);
    Row row;
    const auto label = tokens.front();
    if (label.find(':') != std::string_view::npos)
      throw ParseError("missing label before '" + std::string(label) + "'", line_no);
    std::size_t prev = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const auto tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos)
        throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
      const auto idx = text::parse_int<std::size_t>(tok.substr(0, colon));
      const auto val = text::parse_real(tok.substr(colon + 1));
      if (!idx || *idx == 0 || !val)
        throw ParseError("malformed token '" + std::string(tok) + "'", line_no);
      if (!std::isfinite(*val))
        throw ParseError("non-finite value in token '" + std::string(tok) + "'", line_no);
      if (*idx <= prev)
        throw ParseError("non-increasing index " + std::to_string(*idx) + " after " +
                             std::to_string(prev),
                         line_no);
      prev = *idx;
      row.entries.emplace_back(*idx, *val);
    }
    max_index = std::max(max_index, prev);
    raw_labels.push_back(detail::canonical_label(label));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("empty input: no data rows", std::max<std::size_t>(line_no, 1));
  if (max_index == 0) throw ParseError("no feature entries in input", line_no);

  Dataset ds;
  ds.name = std::move(name);
  ds.features = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()),
                                      static_cast<Eigen::Index>(max_index));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (const auto& [idx, val] : rows[r].entries)
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(idx - 1)) = val;
  detail::assign_labels(ds, raw_labels);
  return ds;
}

inline Dataset parse_libsvm(std::string_view text_in, std::string name = "libsvm") {
  std::istringstream in{std::string(text_in)};
  return parse_libsvm(in, std::move(name));
}

// Writes every feature (zeros included) so the dimensionality survives a
// round trip. OOD rows are written with label -1.
inline void serialize_libsvm(const Dataset& ds, std::ostream& out) {
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const int y = ds.labels[r];
    out << (y == kOodLabel ? std::string("-1") : ds.class_names[static_cast<std::size_t>(y)]);
    for (std::size_t j = 0; j < ds.dims(); ++j)
      out << ' ' << (j + 1) << ':'
          << text::format_real(ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)));
    out << '\n';
  }
}

inline std::string serialize_libsvm(const Dataset& ds) {
  std::ostringstream out;
  serialize_libsvm(ds, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvOptions {
  bool has_header = true;
  // Column holding the label: a header name or a 0-based position.
  std::variant<std::size_t, std::string> label_column = std::size_t{0};
};

inline Dataset parse_csv(std::istream& in, const CsvOptions& opts, std::string name = "csv") {
  auto unquote = [](std::string_view s) {
    s = text::trim(s);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
  };
  std::string line;
  std::size_t line_no = 0;
  std::size_t n_cols = 0;
  std::size_t label_col = 0;
  bool label_resolved = false;
  if (const auto* pos = std::get_if<std::size_t>(&opts.label_column)) {
    label_col = *pos;
    label_resolved = true;
  }
  if (opts.has_header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!text::trim(line).empty()) break;
    }
    const auto header = text::split(text::trim(line), ',');
    n_cols = header.size();
    if (!label_resolved) {
      const auto& want = std::get<std::string>(opts.label_column);
      for (std::size_t c = 0; c < header.size(); ++c)
        if (unquote(header[c]) == want) {
          label_col = c;
          label_resolved = true;
        }
      if (!label_resolved) throw ParseError("label column '" + want + "' not in header", line_no);
    }
  } else if (!label_resolved) {
    throw ConfigError("a named label column requires a header row");
  }

  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto cells = text::split(body, ',');
    if (n_cols == 0) n_cols = cells.size();
    if (cells.size() != n_cols)
      throw ParseError("expected " + std::to_string(n_cols) + " columns, found " +
                           std::to_string(cells.size()),
                       line_no);
    if (label_col >= n_cols) throw ParseError("label column out of range", line_no);
    std::vector<double> feat;
    feat.reserve(n_cols - 1);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = unquote(cells[c]);
      if (c == label_col) {
        raw_labels.push_back(detail::canonical_label(cell));
        continue;
      }
      const auto v = text::parse_real(cell);
      if (!v || !std::isfinite(*v))
        throw ParseError("malformed feature '" + std::string(cell) + "'", line_no);
      feat.push_back(*v);
    }
    rows.push_back(std::move(feat));
  }
  if (rows.empty()) throw ParseError("empty input: no data rows", std::max<std::size_t>(line_no, 1));
  if (n_cols < 2) throw ParseError("need a label column and at least one feature column", line_no);

  Dataset ds;
  ds.name = std::move(name);
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n_cols - 1));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t j = 0; j < rows[r].size(); ++j)
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = rows[r][j];
  detail::assign_labels(ds, raw_labels);
  return ds;
}

// ---------------------------------------------------------------------------
// ID/OOD split
// ---------------------------------------------------------------------------

// Rows whose original label is in `id_classes` become classes 0..K-1 (sorted
// original-label order); every other row becomes OOD. Row order and features
// are untouched.
inline Dataset make_ood_split(const Dataset& ds, const std::vector<std::string>& id_classes) {
  if (id_classes.empty()) throw ConfigError("id_classes must not be empty");
  std::set<std::size_t> chosen;
  for (const auto& want : id_classes) {
    const auto canon = detail::canonical_label(want);
    const auto it = std::find(ds.class_names.begin(), ds.class_names.end(), canon);
    if (it == ds.class_names.end()) throw ConfigError("id class '" + want + "' is not an observed label");
    chosen.insert(static_cast<std::size_t>(it - ds.class_names.begin()));
  }
  std::vector<int> remap(ds.class_names.size(), kOodLabel);
  Dataset out;
  int next = 0;
  for (std::size_t c : chosen) { // std::set iterates in class order == sorted label order
    remap[c] = next++;
    out.class_names.push_back(ds.class_names[c]);
  }
  out.k_classes = next;
  out.features = ds.features;
  out.name = ds.name;
  out.labels.resize(ds.labels.size());
  for (std::size_t r = 0; r < ds.labels.size(); ++r)
    out.labels[r] = ds.labels[r] == kOodLabel ? kOodLabel : remap[static_cast<std::size_t>(ds.labels[r])];
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic two-arc data with a far OOD blob
// ---------------------------------------------------------------------------

struct SyntheticSpec {
  std::size_t n_id_per_class = 383;
  std::size_t n_ood = 210;
  double radius = 1.0;      // arc radius
  double spread = 0.15;     // isotropic noise on the arcs
  double ood_offset = 2.0;  // minimum distance from the OOD center to each class center
  double ood_spread = 0.25; // isotropic noise of the OOD blob
  double ood_angle = 0.0;   // radians, measured from the class-separating direction
  std::uint64_t seed = 0;

  void validate() const {
    if (n_id_per_class < 1) throw ConfigError("n_id_per_class must be >= 1");
    if (!(radius > 0.0)) throw ConfigError("radius must be > 0");
    if (!(spread > 0.0) || !(ood_spread > 0.0)) throw ConfigError("spreads must be > 0");
    if (!(ood_offset >= 0.0)) throw ConfigError("ood_offset must be >= 0");
  }
};

// Expected centers of the two arc classes (means of the noiseless arcs).
inline std::array<Eigen::Vector2d, 2> synthetic_class_centers(const SyntheticSpec& spec) {
  const double r = spec.radius;
  const double arc_mean = 2.0 * r / std::numbers::pi;
  return {Eigen::Vector2d(0.0, arc_mean), Eigen::Vector2d(r, 0.5 * r - arc_mean)};
}

// The OOD center sits on a ray from the midpoint of the class centers, at
// distance ood_offset + half the center separation; by the triangle inequality
// it is at least ood_offset from both centers. ood_angle = 0 points along the
// perpendicular bisector of the two centers.
inline Eigen::Vector2d synthetic_ood_center(const SyntheticSpec& spec) {
  const auto centers = synthetic_class_centers(spec);
  const Eigen::Vector2d mid = 0.5 * (centers[0] + centers[1]);
  const Eigen::Vector2d axis = (centers[1] - centers[0]).normalized();
  const Eigen::Vector2d normal(-axis.y(), axis.x());
  const Eigen::Vector2d dir = std::cos(spec.ood_angle) * normal + std::sin(spec.ood_angle) * axis;
  const double reach = spec.ood_offset + 0.5 * (centers[1] - centers[0]).norm();
  return mid + reach * dir;
}

inline Dataset gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double r = spec.radius;
  const std::size_t n = 2 * spec.n_id_per_class + spec.n_ood;

  Dataset ds;
  ds.name = "synthetic";
  ds.k_classes = 2;
  ds.class_names = {"0", "1"};
  ds.features.resize(static_cast<Eigen::Index>(n), 2);
  ds.labels.resize(n);
  Eigen::Index row = 0;
  for (int k = 0; k < 2; ++k) {
    for (std::size_t i = 0; i < spec.n_id_per_class; ++i, ++row) {
      const double t = angle(rng);
      const double x = k == 0 ? r * std::cos(t) : r * (1.0 - std::cos(t));
      const double y = k == 0 ? r * std::sin(t) : r * (0.5 - std::sin(t));
      ds.features(row, 0) = x + spec.spread * noise(rng);
      ds.features(row, 1) = y + spec.spread * noise(rng);
      ds.labels[static_cast<std::size_t>(row)] = k;
    }
  }
  const Eigen::Vector2d ood = synthetic_ood_center(spec);
  for (std::size_t i = 0; i < spec.n_ood; ++i, ++row) {
    ds.features(row, 0) = ood.x() + spec.ood_spread * noise(rng);
    ds.features(row, 1) = ood.y() + spec.ood_spread * noise(rng);
    ds.labels[static_cast<std::size_t>(row)] = kOodLabel;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Pool state and the simulated oracle
// ---------------------------------------------------------------------------

// Partition of the training rows into labeled-ID, exhausted-OOD and
// unlabeled sets. Indices are dataset row indices; `unlabeled` stays sorted.
class PoolState {
public:
  PoolState() = default;
  PoolState(std::vector<std::pair<std::size_t, int>> labeled, std::vector<std::size_t> unlabeled)
      : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)),
        initial_labeled_(labeled_.size()) {
    std::sort(unlabeled_.begin(), unlabeled_.end());
  }

  const std::vector<std::pair<std::size_t, int>>& labeled() const { return labeled_; }
  const std::set<std::size_t>& exhausted() const { return exhausted_; }
  const std::vector<std::size_t>& unlabeled() const { return unlabeled_; }
  std::size_t budget_spent() const { return budget_spent_; }
  std::size_t initial_labeled() const { return initial_labeled_; }

  bool is_unlabeled(std::size_t idx) const {
    return std::binary_search(unlabeled_.begin(), unlabeled_.end(), idx);
  }

  // Simulated oracle: returns the true label; OOD answers consume budget but
  // add nothing to the labeled set.
  int query(const Dataset& ds, std::size_t idx) {
    const auto it = std::lower_bound(unlabeled_.begin(), unlabeled_.end(), idx);
    if (it == unlabeled_.end() || *it != idx)
      throw UsageError("index " + std::to_string(idx) + " is not in the unlabeled pool");
    unlabeled_.erase(it);
    const int y = ds.labels.at(idx);
    if (y >= 0)
      labeled_.emplace_back(idx, y);
    else
      exhausted_.insert(idx);
    ++budget_spent_;
    return y;
  }

  // Throws if the partition over `training_rows` is broken.
  void check_invariants(std::span<const std::size_t> training_rows) const {
    std::vector<std::size_t> all;
    all.reserve(training_rows.size());
    for (const auto& [idx, y] : labeled_) {
      if (y < 0) throw UsageError("labeled set holds a negative label");
      all.push_back(idx);
    }
    all.insert(all.end(), exhausted_.begin(), exhausted_.end());
    all.insert(all.end(), unlabeled_.begin(), unlabeled_.end());
    std::sort(all.begin(), all.end());
    if (std::adjacent_find(all.begin(), all.end()) != all.end())
      throw UsageError("pool partition sets overlap");
    std::vector<std::size_t> expect(training_rows.begin(), training_rows.end());
    std::sort(expect.begin(), expect.end());
    if (all != expect) throw UsageError("pool partition does not cover the training rows");
    if (budget_spent_ != labeled_.size() + exhausted_.size() - initial_labeled_)
      throw UsageError("budget accounting mismatch");
  }

private:
  std::vector<std::pair<std::size_t, int>> labeled_;
  std::set<std::size_t> exhausted_;
  std::vector<std::size_t> unlabeled_;
  std::size_t budget_spent_ = 0;
  std::size_t initial_labeled_ = 0;
};

inline int oracle_query(const Dataset& ds, PoolState& pool, std::size_t idx) {
  return pool.query(ds, idx);
}

// Draws the initial labeled set from the ID rows among `training_rows`:
// round-robin over classes, uniformly random within each class.
inline PoolState init_pool(const Dataset& ds, std::span<const std::size_t> training_rows,
                           std::size_t n_init, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.k_classes));
  std::size_t n_id = 0;
  for (std::size_t idx : training_rows) {
    const int y = ds.labels.at(idx);
    if (y == kOodLabel) continue;
    by_class[static_cast<std::size_t>(y)].push_back(idx);
    ++n_id;
  }
  if (n_id < n_init)
    throw ConfigError("n_init = " + std::to_string(n_init) + " exceeds the " + std::to_string(n_id) +
                      " ID rows available");
  std::mt19937_64 rng(seed);
  for (auto& rows : by_class) std::shuffle(rows.begin(), rows.end(), rng);

  std::vector<std::pair<std::size_t, int>> labeled;
  labeled.reserve(n_init);
  std::vector<std::size_t> cursor(by_class.size(), 0);
  while (labeled.size() < n_init) {
    for (std::size_t k = 0; k < by_class.size() && labeled.size() < n_init; ++k) {
      if (cursor[k] >= by_class[k].size()) continue;
      labeled.emplace_back(by_class[k][cursor[k]++], static_cast<int>(k));
    }
  }
  std::size_t covered = 0;
  for (std::size_t k = 0; k < by_class.size(); ++k) covered += cursor[k] > 0 ? 1 : 0;
  if (covered < by_class.size())
    std::cerr << "warning: initial labeled set covers " << covered << " of " << by_class.size()
              << " ID classes\n";

  std::vector<bool> taken(ds.rows(), false);
  for (const auto& [idx, y] : labeled) taken[idx] = true;
  std::vector<std::size_t> unlabeled;
  for (std::size_t idx : training_rows)
    if (!taken[idx]) unlabeled.push_back(idx);
  return PoolState(std::move(labeled), std::move(unlabeled));
}

// Whole dataset as the training pool.
inline PoolState init_pool(const Dataset& ds, std::size_t n_init, std::uint64_t seed) {
  std::vector<std::size_t> rows(ds.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return init_pool(ds, rows, n_init, seed);
}

} // namespace poal
