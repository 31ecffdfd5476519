#include "auditlab/census.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "auditlab/rng.hpp"

namespace auditlab {

namespace {

// UCI Adult column layout.
constexpr std::size_t kColumns = 15;
constexpr std::size_t kColAge = 0;
constexpr std::size_t kColEducationNum = 4;
constexpr std::size_t kColSex = 9;
constexpr std::size_t kColCapitalGain = 10;
constexpr std::size_t kColCapitalLoss = 11;
constexpr std::size_t kColHoursPerWeek = 12;
constexpr std::size_t kColIncome = 14;

constexpr std::uint64_t kProxyStream = 0x7365782dULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TabularDataset ingest_census_csv(const std::string& path,
                                 const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open census file: " + path);

  TabularDataset data;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '|') continue;  // test-split preamble line
    ++data.raw_rows;

    const std::vector<std::string> fields = split_csv_line(stripped);
    // 15 columns, or 16 when a trailing name token is present.
    if (fields.size() != kColumns && fields.size() != kColumns + 1) {
      ++data.dropped;
      continue;
    }

    CensusRow row;
    bool ok = true;
    const std::size_t numeric_cols[kCensusFeatures] = {
        kColAge, kColEducationNum, kColCapitalGain, kColCapitalLoss,
        kColHoursPerWeek};
    for (std::size_t f = 0; f < kCensusFeatures; ++f) {
      const std::string& value = fields[numeric_cols[f]];
      if (value.empty() || value == "?") {
        ok = false;
        break;
      }
      try {
        std::size_t used = 0;
        row.features[f] = std::stod(value, &used);
        if (used != value.size()) ok = false;
      } catch (const std::exception&) {
        ok = false;
      }
      if (!ok) break;
    }

    if (ok) {
      const std::string& sex = fields[kColSex];
      if (sex == "Male") {
        row.sex = 0;
      } else if (sex == "Female") {
        row.sex = 1;
      } else {
        ok = false;
      }
    }
    if (ok) {
      std::string income = fields[kColIncome];
      if (!income.empty() && income.back() == '.') income.pop_back();  // test split
      if (income == ">50K") {
        row.label = 1;
      } else if (income == "<=50K") {
        row.label = 0;
      } else {
        ok = false;
      }
    }
    if (!ok) {
      ++data.dropped;
      continue;
    }
    if (fields.size() == kColumns + 1) row.name_token = fields[kColumns];
    data.rows.push_back(std::move(row));
  }

  if (data.raw_rows == 0) throw ParseError("census file is empty: " + path);
  const double drop_fraction =
      static_cast<double>(data.dropped) / static_cast<double>(data.raw_rows);
  if (drop_fraction > options.max_drop_fraction) {
    std::ostringstream msg;
    msg << "census ingestion dropped " << data.dropped << "/" << data.raw_rows
        << " rows (threshold " << options.max_drop_fraction << "): " << path;
    throw ParseError(msg.str());
  }
  return data;
}

double LogisticModel::probability(
    const std::array<double, kCensusFeatures>& features, int sex) const {
  double z = intercept;
  for (std::size_t f = 0; f < kCensusFeatures; ++f)
    z += weights[f] * (features[f] - feature_mean[f]) / feature_scale[f];
  z += weights[kCensusFeatures] * static_cast<double>(sex);
  return sigmoid(z);
}

int LogisticModel::predict(const std::array<double, kCensusFeatures>& features,
                           int sex) const {
  return probability(features, sex) > 0.5 ? 1 : 0;
}

LogisticModel train_logistic(const TabularDataset& data,
                             const LogisticHyperparams& hyper, std::uint64_t seed) {
  const std::size_t n = data.rows.size();
  if (n < 2) throw InvalidArgument("training needs at least two rows");
  bool any_pos = false, any_neg = false;
  for (const CensusRow& row : data.rows) (row.label ? any_pos : any_neg) = true;
  if (!any_pos || !any_neg)
    throw InvalidArgument("degenerate training data: a single class present");

  LogisticModel model;
  model.hyper = hyper;
  model.seed = seed;

  // Standardization parameters from this (training) split.
  for (std::size_t f = 0; f < kCensusFeatures; ++f) {
    double sum = 0.0;
    for (const CensusRow& row : data.rows) sum += row.features[f];
    model.feature_mean[f] = sum / static_cast<double>(n);
    double var = 0.0;
    for (const CensusRow& row : data.rows) {
      const double d = row.features[f] - model.feature_mean[f];
      var += d * d;
    }
    const double scale = std::sqrt(var / static_cast<double>(n));
    model.feature_scale[f] = scale > 0.0 ? scale : 1.0;
  }

  std::vector<std::array<double, kCensusFeatures + 1>> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t f = 0; f < kCensusFeatures; ++f)
      x[i][f] = (data.rows[i].features[f] - model.feature_mean[f]) /
                model.feature_scale[f];
    x[i][kCensusFeatures] = static_cast<double>(data.rows[i].sex);
  }

  Rng init(derive_seed(seed, kInitStream));
  for (double& w : model.weights) w = (init.uniform01() - 0.5) * 0.02;
  model.intercept = 0.0;

  // Full-batch gradient descent on the mean logistic loss.
  std::array<double, kCensusFeatures + 1> grad{};
  for (std::uint64_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    grad.fill(0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = model.intercept;
      for (std::size_t f = 0; f <= kCensusFeatures; ++f)
        z += model.weights[f] * x[i][f];
      const double err = sigmoid(z) - static_cast<double>(data.rows[i].label);
      for (std::size_t f = 0; f <= kCensusFeatures; ++f) grad[f] += err * x[i][f];
      grad_b += err;
    }
    const double scale = hyper.learning_rate / static_cast<double>(n);
    for (std::size_t f = 0; f <= kCensusFeatures; ++f)
      model.weights[f] -= scale * grad[f];
    model.intercept -= scale * grad_b;
  }

  std::size_t correct = 0;
  for (const CensusRow& row : data.rows)
    if (model.predict(row.features, row.sex) == row.label) ++correct;
  model.training_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return model;
}

AttributeProxy AttributeProxy::noisy_channel(double error_rate, std::uint64_t seed) {
  if (error_rate < 0.0 || error_rate > 1.0)
    throw InvalidArgument("proxy error rate must lie in [0, 1]");
  AttributeProxy proxy;
  proxy.mode = Mode::NoisyChannel;
  proxy.error_rate = error_rate;
  proxy.seed = seed;
  return proxy;
}

AttributeProxy AttributeProxy::from_table_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open name table: " + path);
  AttributeProxy proxy;
  proxy.mode = Mode::Table;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty name table: " + path);
  if (trim(line) != "name,p_male")
    throw ParseError("name table must start with header 'name,p_male': " + path);
  while (std::getline(in, line)) {
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto comma = stripped.find(',');
    if (comma == std::string::npos)
      throw ParseError("malformed name table row: " + stripped);
    const std::string name = trim(stripped.substr(0, comma));
    double p_male = 0.0;
    try {
      p_male = std::stod(stripped.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError("malformed name table row: " + stripped);
    }
    if (p_male < 0.0 || p_male > 1.0)
      throw ParseError("p_male out of range in name table row: " + stripped);
    proxy.name_p_male[name] = p_male;
  }
  return proxy;
}

int proxy_sex(const AttributeProxy& proxy, const CensusRow& row,
              std::uint64_t row_index) {
  switch (proxy.mode) {
    case AttributeProxy::Mode::NoisyChannel: {
      // Seeded per row, so the estimate is reproducible row by row.
      Rng rng(derive_seed(proxy.seed, kProxyStream + row_index));
      const bool flip = rng.uniform01() < proxy.error_rate;
      return flip ? 1 - row.sex : row.sex;
    }
    case AttributeProxy::Mode::Table: {
      if (row.name_token.empty())
        throw InvalidArgument("table proxy needs a name token on every row");
      const auto it = proxy.name_p_male.find(row.name_token);
      if (it == proxy.name_p_male.end())
        throw InvalidArgument("name not present in table: " + row.name_token);
      return it->second >= 0.5 ? 0 : 1;  // majority sex for the name
    }
  }
  throw InvalidArgument("unreachable proxy mode");
}

DisparateImpactEstimate audit_di(const LogisticModel& model,
                                 const TabularDataset& data, Channel channel,
                                 const AttributeProxy* proxy,
                                 DiOrientation orientation) {
  if (data.rows.empty()) throw InvalidArgument("audit needs a nonempty dataset");
  if (channel == Channel::ViaB && proxy == nullptr)
    throw InvalidArgument("via_B audit needs an attribute proxy");

  std::vector<std::pair<bool, int>> samples;
  samples.reserve(data.rows.size());
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const CensusRow& row = data.rows[i];
    // The estimated sex replaces the true one both as a model input and as
    // the group assignment.
    const int sex =
        channel == Channel::ViaA ? row.sex : proxy_sex(*proxy, row, i);
    const int outcome = model.predict(row.features, sex);
    samples.emplace_back(sex == 1, outcome);
  }
  return disparate_impact(samples, orientation);
}

double proxy_agreement(const AttributeProxy& proxy, const TabularDataset& data) {
  if (data.rows.empty()) throw InvalidArgument("agreement needs a nonempty dataset");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < data.rows.size(); ++i)
    if (proxy_sex(proxy, data.rows[i], i) == data.rows[i].sex) ++agree;
  return static_cast<double>(agree) / static_cast<double>(data.rows.size());
}

nlohmann::json run_census_audit(const CensusAuditConfig& config) {
  const TabularDataset train = ingest_census_csv(config.train_path);
  const TabularDataset test = ingest_census_csv(config.test_path);

  const LogisticModel model = train_logistic(train, config.hyper, config.seed);

  AttributeProxy proxy =
      config.name_table_path
          ? AttributeProxy::from_table_csv(*config.name_table_path)
          : AttributeProxy::noisy_channel(config.error_rate, config.seed);
  if (config.name_table_path) proxy.error_rate = -1.0;  // not applicable

  const DisparateImpactEstimate via_a =
      audit_di(model, test, Channel::ViaA, nullptr, config.orientation);
  const DisparateImpactEstimate via_b =
      audit_di(model, test, Channel::ViaB, &proxy, config.orientation);
  const double agreement = proxy_agreement(proxy, test);

  auto channel_json = [&](const char* name, const DisparateImpactEstimate& e,
                          double error_rate) {
    return nlohmann::json{{"channel", name},
                          {"di", e.infinite() ? nlohmann::json("inf")
                                              : nlohmann::json(e.di)},
                          {"violation", e.violation},
                          {"rate_unprotected", e.rate_unprotected},
                          {"rate_protected", e.rate_protected},
                          {"proxy_error_rate", error_rate},
                          {"seed", config.seed}};
  };

  nlohmann::json result{
      {"counts",
       {{"train_raw", train.raw_rows},
        {"train_used", train.rows.size()},
        {"train_dropped", train.dropped},
        {"test_raw", test.raw_rows},
        {"test_used", test.rows.size()},
        {"test_dropped", test.dropped}}},
      {"training_accuracy", model.training_accuracy},
      {"di_orientation", di_orientation_name(config.orientation)},
      {"channels",
       nlohmann::json::array({channel_json("via_A", via_a, 0.0),
                              channel_json("via_B", via_b, proxy.error_rate)})},
      {"proxy_agreement", agreement}};

  // |DI_B - DI_A| / DI_A: the relative drift the intermediate proxy induces.
  if (!via_a.infinite() && !via_b.infinite() && via_a.di > 0.0)
    result["epsilon_di"] = std::abs(via_b.di - via_a.di) / via_a.di;
  else
    result["epsilon_di"] = nullptr;
  return result;
}

}  // namespace auditlab
