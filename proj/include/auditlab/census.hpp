#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditlab/estimators.hpp"

namespace auditlab {

// Retained numeric features, in column order: age, education-num,
// capital-gain, capital-loss, hours-per-week.
inline constexpr std::size_t kCensusFeatures = 5;

struct CensusRow {
  std::array<double, kCensusFeatures> features{};
  int sex = 0;    // 0 = male, 1 = female (the protected group)
  int label = 0;  // 1 iff income > 50K
  std::string name_token;  // optional 16th column; empty when absent
};

struct TabularDataset {
  std::vector<CensusRow> rows;
  std::uint64_t raw_rows = 0;  // non-blank, non-comment lines seen
  std::uint64_t dropped = 0;
};

struct IngestOptions {
  double max_drop_fraction = 0.5;
};

// Comma-separated UCI Adult layout (15 columns; an optional 16th column is
// read as a name token). Tolerates the test-split quirks: a leading line
// starting with '|' and labels with a trailing period. Rows with missing or
// malformed retained fields are dropped and counted.
TabularDataset ingest_census_csv(const std::string& path,
                                 const IngestOptions& options = {});

struct LogisticHyperparams {
  double learning_rate = 0.5;
  std::uint64_t epochs = 600;

  bool operator==(const LogisticHyperparams&) const = default;
};

// Logistic regression on the 5 standardized features plus the raw sex bit.
struct LogisticModel {
  std::array<double, kCensusFeatures + 1> weights{};  // sex coefficient last
  double intercept = 0.0;
  std::array<double, kCensusFeatures> feature_mean{};
  std::array<double, kCensusFeatures> feature_scale{};
  double training_accuracy = 0.0;
  LogisticHyperparams hyper;
  std::uint64_t seed = 0;

  double probability(const std::array<double, kCensusFeatures>& features,
                     int sex) const;
  int predict(const std::array<double, kCensusFeatures>& features, int sex) const;
};

// Full-batch gradient descent on the standard logistic loss; deterministic
// for fixed (data, hyperparams, seed). Throws on single-class data.
LogisticModel train_logistic(const TabularDataset& data,
                             const LogisticHyperparams& hyper, std::uint64_t seed);

// Sex estimate from the B side: either a name table (majority sex per name)
// or a seeded noisy channel that flips the true sex with a fixed error rate.
struct AttributeProxy {
  enum class Mode { Table, NoisyChannel };

  Mode mode = Mode::NoisyChannel;
  double error_rate = 0.0;
  std::uint64_t seed = 0;
  std::map<std::string, double> name_p_male;

  static AttributeProxy noisy_channel(double error_rate, std::uint64_t seed);
  // Header "name,p_male", UTF-8.
  static AttributeProxy from_table_csv(const std::string& path);
};

int proxy_sex(const AttributeProxy& proxy, const CensusRow& row,
              std::uint64_t row_index);

enum class Channel { ViaA, ViaB };

// Disparate impact of the model over the dataset. ViaA scores with the true
// sex; ViaB substitutes the proxy estimate both as the model input and as the
// group assignment. Defaults to the Swapped orientation (protected rate in
// the numerator), the reading the census scenario reports.
DisparateImpactEstimate audit_di(const LogisticModel& model,
                                 const TabularDataset& data, Channel channel,
                                 const AttributeProxy* proxy = nullptr,
                                 DiOrientation orientation = DiOrientation::Swapped);

// Fraction of rows where the proxy estimate equals the true sex.
double proxy_agreement(const AttributeProxy& proxy, const TabularDataset& data);

struct CensusAuditConfig {
  std::string train_path;
  std::string test_path;
  double error_rate = 0.309;
  std::uint64_t seed = 0;
  LogisticHyperparams hyper;
  DiOrientation orientation = DiOrientation::Swapped;
  std::optional<std::string> name_table_path;
};

// End-to-end run: ingest both splits, train on the training file, audit the
// test file through both channels.
nlohmann::json run_census_audit(const CensusAuditConfig& config);

}  // namespace auditlab
