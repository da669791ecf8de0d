#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rssgh/data.hpp"
#include "rssgh/graph.hpp"
#include "rssgh/lifetable.hpp"
#include "rssgh/sampler.hpp"

namespace rssgh {

namespace fs = std::filesystem;

struct SplineSpec {
  std::string column;
  std::size_t knots = 0;
};

/// Which columns of the patient file become model inputs. Base columns
/// time, status, age, year, region (1-based) are always read; sex and
/// deprivation are read when listed in `stratum_keys`.
struct PatientSchema {
  std::vector<std::string> covariates;
  std::vector<SplineSpec> splines;
  std::vector<std::string> stratum_keys = {"sex", "deprivation", "region"};
};

Dataset load_patients(const fs::path& path, const PatientSchema& schema);
/// Base columns, sex and deprivation from the stratum key, then covariates
/// not already written.
void save_patients(const fs::path& path, const Dataset& data);

/// Columns age, year, rate, and optionally sex, deprivation, region.
LifeTable load_lifetable(const fs::path& path);
void save_lifetable(const fs::path& path, const LifeTable& table);

/// One edge "k l" per line, 1-based; '#' starts a comment. The region count is
/// the largest label, or `regions` when larger.
RegionGraph load_adjacency(const fs::path& path, std::size_t regions = 0);
void save_adjacency(const fs::path& path, const RegionGraph& graph);

/// Constrained draws plus lp__, accept_stat__, divergent__.
void save_draws(const fs::path& path, const ChainDraws& chain, const std::vector<std::string>& names);
/// Returns the parameter names; `unconstrained` is left empty.
std::pair<std::vector<std::string>, ChainDraws> load_draws(const fs::path& path);

/// Shortest round-trip text for a double.
std::string format_double(double v);

/// Write to a sibling temporary file and rename into place.
void write_file_atomic(const fs::path& path, const std::string& contents);

/// Output directory populated under a staging name and renamed on commit;
/// abandoned staging directories are removed by the destructor.
class StagedDirectory {
 public:
  explicit StagedDirectory(fs::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const fs::path& path() const noexcept { return staging_; }
  fs::path operator/(const std::string& name) const { return staging_ / name; }
  void commit();

 private:
  fs::path target_, staging_;
  bool committed_ = false;
};

}  // namespace rssgh
