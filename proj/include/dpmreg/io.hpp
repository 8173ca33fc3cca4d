#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpmreg/model.hpp"
#include "dpmreg/sampler.hpp"
#include "dpmreg/simulate.hpp"

namespace dpmreg {

// Numeric CSV with a header row. Quoted fields are accepted.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;  // rows x header.size()

  // Index of a named column, or -1.
  int column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values);

// The response column becomes y; every other column is a covariate.
// log_response applies a natural log (values must be positive).
Dataset dataset_from_table(const CsvTable& table, const std::string& response,
                           bool log_response = false);

// Pulls the named covariate columns in order; errors list every missing name.
Eigen::MatrixXd covariates_from_table(const CsvTable& table, const std::vector<std::string>& names);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

// z-score parameters (sample sd) for y and every covariate. Constant columns
// are a DataError.
NormState fit_normalization(const Dataset& data);
Dataset normalize(const Dataset& data, const NormState& state);
Eigen::MatrixXd normalize_covariates(const Eigen::MatrixXd& X, const NormState& state);
Eigen::VectorXd normalize_response(const Eigen::VectorXd& y, const NormState& state);
Eigen::VectorXd denormalize_response(const Eigen::VectorXd& y, const NormState& state);

// ---- posterior archive ----

inline constexpr std::uint32_t kArchiveVersion = 1;

struct Archive {
  Hyperparams hyper;
  ChainConfig chain;
  std::optional<NormState> norm_state;
  std::vector<std::string> columns;
  std::string response = "y";
  bool log_response = false;
  PosteriorDraws draws;
};

std::string serialize_archive(const Archive& archive);
Archive deserialize_archive(const std::string& bytes);
void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

// ---- simulation truth sidecar ----

void write_truth_json(const std::filesystem::path& path, const SimTruth& truth);
SimTruth read_truth_json(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace dpmreg
