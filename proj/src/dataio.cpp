#include "svcbilevel/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>

namespace svcbilevel {

Eigen::VectorXd Dataset::dense_row(std::size_t i) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n_features);
  for (const auto& [idx, val] : samples.at(i)) x(idx - 1) = val;
  return x;
}

Eigen::MatrixXd Dataset::dense_columns(const std::vector<std::size_t>& indices) const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_features, static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c)
    for (const auto& [idx, val] : samples.at(indices[c])) out(idx - 1, static_cast<Eigen::Index>(c)) = val;
  return out;
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  // from_chars for double is available in libstdc++ >= 11.
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_int(std::string_view tok, int& out) {
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

[[noreturn]] void fail_line(const std::string& source, std::size_t line_no, const std::string& what) {
  throw DataError(source + ":" + std::to_string(line_no) + ": " + what);
}

std::vector<double> normalize_labels(const std::vector<double>& raw, const std::string& source) {
  std::set<double> seen(raw.begin(), raw.end());
  auto within = [&](std::initializer_list<double> allowed) {
    return std::all_of(seen.begin(), seen.end(), [&](double v) {
      return std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    });
  };
  std::vector<double> out(raw.size());
  if (within({-1.0, 1.0})) {
    out = raw;
  } else if (within({0.0, 1.0})) {
    std::transform(raw.begin(), raw.end(), out.begin(), [](double v) { return v == 0.0 ? -1.0 : 1.0; });
  } else if (within({1.0, 2.0})) {
    std::transform(raw.begin(), raw.end(), out.begin(), [](double v) { return v == 2.0 ? -1.0 : 1.0; });
  } else {
    std::ostringstream msg;
    msg << source << ": labels are not binary {-1,+1}, {0,1} or {1,2}; saw";
    for (double v : seen) msg << ' ' << v;
    throw DataError(msg.str());
  }
  return out;
}

}  // namespace

Dataset parse_libsvm(std::istream& in, int n_features_override, const std::string& source_name) {
  Dataset ds;
  std::vector<double> raw_labels;
  std::string line;
  std::size_t line_no = 0;
  int max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream tokens(line);
    std::string tok;
    if (!(tokens >> tok)) continue;

    double label = 0.0;
    if (!parse_double(tok, label)) fail_line(source_name, line_no, "bad label '" + tok + "'");

    SparseRow row;
    int last = 0;
    while (tokens >> tok) {
      auto colon = tok.find(':');
      if (colon == std::string::npos) fail_line(source_name, line_no, "expected idx:val, got '" + tok + "'");
      int idx = 0;
      double val = 0.0;
      std::string_view sv(tok);
      if (!parse_int(sv.substr(0, colon), idx) || idx < 1)
        fail_line(source_name, line_no, "bad feature index in '" + tok + "'");
      if (!parse_double(sv.substr(colon + 1), val))
        fail_line(source_name, line_no, "bad feature value in '" + tok + "'");
      if (idx <= last) fail_line(source_name, line_no, "feature indices must be strictly increasing");
      last = idx;
      if (val != 0.0) row.emplace_back(idx, val);
    }
    max_index = std::max(max_index, last);
    ds.samples.push_back(std::move(row));
    raw_labels.push_back(label);
  }
  if (ds.samples.empty()) throw DataError(source_name + ": no samples");
  ds.labels = normalize_labels(raw_labels, source_name);
  ds.n_features = std::max(max_index, n_features_override);
  return ds;
}

Dataset parse_libsvm(const std::filesystem::path& path, int n_features_override) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return parse_libsvm(in, n_features_override, path.string());
}

void write_libsvm(std::ostream& out, const Dataset& ds) {
  auto old_precision = out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << (ds.labels[i] > 0 ? "+1" : "-1");
    for (const auto& [idx, val] : ds.samples[i]) out << ' ' << idx << ':' << val;
    out << '\n';
  }
  out.precision(old_precision);
}

void write_libsvm(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_libsvm(out, ds);
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  std::mt19937_64 gen(seed);
  for (std::size_t i = n; i > 1; --i) {
    // Unbiased draw in [0, i) by rejection; std::uniform_int_distribution is not portable.
    const std::uint64_t bound = i;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r = gen();
    while (r >= limit) r = gen();
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(r % bound)]);
  }
  return perm;
}

SplitPlan make_split(const Dataset& ds, int folds, std::size_t l1, std::uint64_t seed) {
  if (folds < 2) throw DataError("need at least 2 folds");
  if (l1 < static_cast<std::size_t>(folds))
    throw DataError("train size " + std::to_string(l1) + " is smaller than the fold count");
  if (l1 > ds.size())
    throw DataError("train size " + std::to_string(l1) + " exceeds dataset size " + std::to_string(ds.size()));

  const auto perm = seeded_permutation(ds.size(), seed);
  SplitPlan plan;
  plan.seed = seed;
  plan.test_indices.assign(perm.begin() + static_cast<std::ptrdiff_t>(l1), perm.end());

  const std::size_t t = static_cast<std::size_t>(folds);
  const std::size_t m1 = l1 / t;
  plan.folds.resize(t);
  for (std::size_t k = 0; k < l1; ++k) {
    auto& fold = plan.folds[k % t];
    if (fold.size() < m1)
      fold.push_back(perm[k]);
    else
      plan.dropped.push_back(perm[k]);
  }
  for (const auto& fold : plan.folds) plan.cv_indices.insert(plan.cv_indices.end(), fold.begin(), fold.end());
  return plan;
}

}  // namespace svcbilevel
