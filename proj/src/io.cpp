#include "rssgh/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

#include "rssgh/errors.hpp"

namespace rssgh {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Row-oriented CSV with a header.
class CsvReader {
 public:
  explicit CsvReader(const fs::path& path) : path_(path), in_(path) {
    if (!in_) throw ConfigError("cannot open " + path.string());
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!trim(line).empty()) break;
    }
    header_ = split_csv(line);
    if (header_.empty() || header_[0].empty()) throw ConfigError(path.string() + ": missing header row");
    for (std::size_t i = 0; i < header_.size(); ++i) {
      if (!index_.emplace(header_[i], i).second)
        throw ConfigError(path.string() + ": duplicate column '" + header_[i] + "'");
    }
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t column(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError(path_.string() + ": missing column '" + name + "'");
    return it->second;
  }
  const std::vector<std::string>& header() const { return header_; }

  bool next() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (trim(line).empty()) continue;
      row_ = split_csv(line);
      if (row_.size() != header_.size()) fail("expected " + std::to_string(header_.size()) + " fields, found " +
                                              std::to_string(row_.size()));
      return true;
    }
    return false;
  }

  double number(std::size_t col) const {
    const std::string& s = row_[col];
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      if (s == "inf" || s == "Inf") return std::numeric_limits<double>::infinity();
      fail("column '" + header_[col] + "': '" + s + "' is not a number");
    }
    return v;
  }

  int integer(std::size_t col) const {
    const double v = number(col);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail("column '" + header_[col] + "' must be an integer");
    return static_cast<int>(v);
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(path_.string() + ":" + std::to_string(line_no_) + ": " + what);
  }

 private:
  fs::path path_;
  std::ifstream in_;
  std::vector<std::string> header_, row_;
  std::map<std::string, std::size_t> index_;
  std::size_t line_no_ = 0;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp-" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << contents;
    if (!out) throw ConfigError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

StagedDirectory::StagedDirectory(fs::path target) : target_(std::move(target)) {
  if (fs::exists(target_) && !(fs::is_directory(target_) && fs::is_empty(target_)))
    throw ConfigError("output directory " + target_.string() + " already exists and is not empty");
  staging_ = target_.string() + ".partial-" + std::to_string(::getpid());
  fs::remove_all(staging_);
  fs::create_directories(staging_);
}

StagedDirectory::~StagedDirectory() {
  if (!committed_) {
    std::error_code ec;
    fs::remove_all(staging_, ec);
  }
}

void StagedDirectory::commit() {
  if (fs::exists(target_)) fs::remove(target_);
  if (target_.has_parent_path()) fs::create_directories(target_.parent_path());
  fs::rename(staging_, target_);
  committed_ = true;
}

Dataset load_patients(const fs::path& path, const PatientSchema& schema) {
  CsvReader csv(path);
  const auto c_time = csv.column("time"), c_status = csv.column("status"), c_age = csv.column("age"),
             c_year = csv.column("year"), c_region = csv.column("region");
  const bool use_sex = contains(schema.stratum_keys, "sex"), use_dep = contains(schema.stratum_keys, "deprivation"),
             use_reg = contains(schema.stratum_keys, "region");
  for (const auto& k : schema.stratum_keys)
    if (k != "sex" && k != "deprivation" && k != "region") throw ConfigError("unknown life table key '" + k + "'");
  const std::size_t c_sex = use_sex ? csv.column("sex") : 0, c_dep = use_dep ? csv.column("deprivation") : 0;
  std::vector<std::size_t> cov;
  for (const auto& name : schema.covariates) cov.push_back(csv.column(name));
  std::vector<std::size_t> spl;
  for (const auto& s : schema.splines) spl.push_back(csv.column(s.column));

  Dataset d;
  d.covariates = schema.covariates;
  std::vector<std::vector<double>> raw(spl.size());
  while (csv.next()) {
    PatientRecord r;
    r.time = csv.number(c_time);
    if (!(r.time >= 0.0) || !std::isfinite(r.time)) csv.fail("time must be finite and non-negative");
    r.status = csv.integer(c_status);
    if (r.status != 0 && r.status != 1) csv.fail("status must be 0 or 1");
    r.age = csv.number(c_age);
    r.year = csv.number(c_year);
    const int region = csv.integer(c_region);
    if (region < 1) csv.fail("region labels are 1-based");
    r.region = static_cast<std::size_t>(region - 1);
    r.stratum = {use_sex ? csv.integer(c_sex) : 0, use_dep ? csv.integer(c_dep) : 0, use_reg ? region : 0};
    for (std::size_t c : cov) r.x.push_back(csv.number(c));
    for (std::size_t j = 0; j < spl.size(); ++j) raw[j].push_back(csv.number(spl[j]));
    d.records.push_back(std::move(r));
  }
  for (std::size_t j = 0; j < spl.size(); ++j) d.add_spline(schema.splines[j].column, raw[j], schema.splines[j].knots);
  return d;
}

void save_patients(const fs::path& path, const Dataset& data) {
  std::vector<std::string> header = {"time", "status", "age", "year", "region", "sex", "deprivation"};
  std::vector<std::size_t> extra;
  for (std::size_t j = 0; j < data.covariates.size(); ++j) {
    if (contains(header, data.covariates[j])) continue;
    header.push_back(data.covariates[j]);
    extra.push_back(j);
  }
  const std::size_t sex_col = [&] {
    for (std::size_t j = 0; j < data.covariates.size(); ++j)
      if (data.covariates[j] == "sex") return j;
    return data.covariates.size();
  }();
  std::ostringstream out;
  out << join(header) << '\n';
  for (const auto& r : data.records) {
    if (sex_col < r.x.size() && r.x[sex_col] != r.stratum.sex)
      throw ConfigError("save_patients: sex covariate disagrees with the stratum key");
    out << format_double(r.time) << ',' << r.status << ',' << format_double(r.age) << ','
        << format_double(r.year) << ',' << r.region + 1 << ',' << r.stratum.sex << ',' << r.stratum.deprivation;
    for (std::size_t j : extra) out << ',' << format_double(r.x[j]);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

LifeTable load_lifetable(const fs::path& path) {
  CsvReader csv(path);
  const auto c_age = csv.column("age"), c_year = csv.column("year"), c_rate = csv.column("rate");
  const bool has_sex = csv.has("sex"), has_dep = csv.has("deprivation"), has_reg = csv.has("region");
  const std::size_t c_sex = has_sex ? csv.column("sex") : 0, c_dep = has_dep ? csv.column("deprivation") : 0,
                    c_reg = has_reg ? csv.column("region") : 0;
  LifeTable t;
  while (csv.next()) {
    const StratumKey key{has_sex ? csv.integer(c_sex) : 0, has_dep ? csv.integer(c_dep) : 0,
                         has_reg ? csv.integer(c_reg) : 0};
    try {
      t.add(key, csv.integer(c_age), csv.integer(c_year), csv.number(c_rate));
    } catch (const ConfigError& e) {
      csv.fail(e.what());
    }
  }
  t.finalize();
  return t;
}

void save_lifetable(const fs::path& path, const LifeTable& table) {
  std::ostringstream out;
  out << "age,year,sex,deprivation,region,rate\n";
  table.visit([&](const StratumKey& k, int age, int year, double rate) {
    out << age << ',' << year << ',' << k.sex << ',' << k.deprivation << ',' << k.region << ','
        << format_double(rate) << '\n';
  });
  write_file_atomic(path, out.str());
}

RegionGraph load_adjacency(const fs::path& path, std::size_t regions) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::string line;
  std::size_t line_no = 0, max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    std::istringstream ss(line);
    long long a = 0, b = 0;
    std::string rest;
    if (!(ss >> a >> b) || (ss >> rest) || a < 1 || b < 1)
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected two 1-based region labels");
    if (a == b)
      throw GraphError(path.string() + ":" + std::to_string(line_no) + ": self loop on region " + std::to_string(a));
    edges.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1)});
    max_label = std::max({max_label, static_cast<std::size_t>(a), static_cast<std::size_t>(b)});
  }
  return RegionGraph(std::max(regions, max_label), edges);
}

void save_adjacency(const fs::path& path, const RegionGraph& graph) {
  std::ostringstream out;
  out << "# " << graph.size() << " regions\n";
  for (const auto& [a, b] : graph.edges()) out << a + 1 << ' ' << b + 1 << '\n';
  write_file_atomic(path, out.str());
}

void save_draws(const fs::path& path, const ChainDraws& chain, const std::vector<std::string>& names) {
  if (static_cast<std::size_t>(chain.draws.cols()) != names.size())
    throw DimensionError("save_draws: names do not match the draw columns");
  std::ostringstream out;
  out << join(names) << (names.empty() ? "" : ",") << "lp__,accept_stat__,divergent__\n";
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    for (Eigen::Index k = 0; k < chain.draws.cols(); ++k) out << format_double(chain.draws(i, k)) << ',';
    const auto s = static_cast<std::size_t>(i);
    out << format_double(chain.log_density[s]) << ',' << format_double(chain.accept_stat[s]) << ','
        << chain.divergent[s] << '\n';
  }
  write_file_atomic(path, out.str());
}

std::pair<std::vector<std::string>, ChainDraws> load_draws(const fs::path& path) {
  CsvReader csv(path);
  auto names = csv.header();
  const auto c_lp = csv.column("lp__"), c_acc = csv.column("accept_stat__"), c_div = csv.column("divergent__");
  if (names.size() < 3 || c_lp != names.size() - 3 || c_acc != names.size() - 2 || c_div != names.size() - 1)
    throw ConfigError(path.string() + ": lp__, accept_stat__, divergent__ must be the last columns");
  names.resize(names.size() - 3);
  std::vector<std::vector<double>> rows;
  ChainDraws chain;
  while (csv.next()) {
    std::vector<double> row(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) row[k] = csv.number(k);
    rows.push_back(std::move(row));
    chain.log_density.push_back(csv.number(c_lp));
    chain.accept_stat.push_back(csv.number(c_acc));
    chain.divergent.push_back(csv.integer(c_div));
    chain.divergences += static_cast<std::size_t>(chain.divergent.back() != 0);
  }
  chain.draws.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < names.size(); ++k)
      chain.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return {names, chain};
}

}  // namespace rssgh
