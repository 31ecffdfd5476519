#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditlab/estimators.hpp"
#include "auditlab/sources.hpp"

namespace auditlab {

struct Reconstruction {
  Count popularity = 0;  // sum of views
  Money earnings = 0;    // sum of views * rate, exact

  bool operator==(const Reconstruction&) const = default;
};

// Rebuild a creator's API-side answer from its scraped videos. Throws on an
// empty set or on scraps from mixed creators.
Reconstruction reconstruct(std::span<const ScrapAnswer> scraps);

struct ConsistencyFlag {
  CreatorId creator_id = 0;
  ApiAnswer declared;
  Reconstruction reconstructed;
  bool complete = false;

  bool operator==(const ConsistencyFlag&) const = default;
};

// Complete coverage: flag iff reconstruction differs from the declaration
// anywhere. Partial coverage: the reconstruction is only a lower bound, so
// only an excess (sum m.r > e or sum m > p, strict) is a sound flag.
std::optional<ConsistencyFlag> check_consistency(const ApiAnswer& answer,
                                                 std::span<const ScrapAnswer> scraps,
                                                 bool complete);

struct ConsistencyReport {
  std::vector<CreatorId> checked_creators;
  std::vector<ConsistencyFlag> flags;

  bool any_inconsistent() const { return !flags.empty(); }
  nlohmann::json to_json() const;
  std::string to_csv() const;  // creator_id,declared_e,reconstructed_e,complete

  bool operator==(const ConsistencyReport&) const = default;
};

// The constant score of a proxy that performs no better than random.
double poor_proxy_score(std::uint64_t input_space_size);

// A consistency scorer with threshold zeta: a sample pair is inconsistent
// when its score falls below zeta.
struct ProxySpec {
  enum class Kind { Perfect, Poor, Intermediate };

  Kind kind = Kind::Perfect;
  double zeta = 0.5;
  std::uint64_t input_space_size = 0;  // |X_A|; required for Poor
  std::string descriptor;
  // Pluggable scorer for Intermediate proxies; the formalism fixes no single
  // probability measure for them.
  std::function<double(const ApiAnswer&, std::span<const ScrapAnswer>, bool)> scorer;

  // Indicator scorer; any zeta in (0,1) behaves identically.
  static ProxySpec perfect();
  // zeta defaults to 1/(2 |X_A|), below the constant score, so nothing is
  // ever inconsistent.
  static ProxySpec poor(std::uint64_t input_space_size);
  static ProxySpec intermediate(
      std::string descriptor, double zeta,
      std::function<double(const ApiAnswer&, std::span<const ScrapAnswer>, bool)> scorer);
  // "perfect" or "poor" (CLI form).
  static ProxySpec parse(const std::string& name, std::uint64_t input_space_size);

  double score(const ApiAnswer& answer, std::span<const ScrapAnswer> scraps,
               bool complete) const;
  bool inconsistent(const ApiAnswer& answer, std::span<const ScrapAnswer> scraps,
                    bool complete) const;
  std::string name() const;
};

// The shape of the consistent-sample set a proxy induces for any given
// B-sample: a perfect proxy pins a single declared answer, a poor proxy
// accepts everything, and the intermediate constructions used here leave a
// pair of indistinguishable candidates.
struct CandidateSet {
  enum class Shape { All, Singleton, Pair };

  Shape shape = Shape::Singleton;

  static CandidateSet for_proxy(const ProxySpec& proxy);
  std::string name() const;  // "all" | "singleton" | "pair"
};

// Synthesize API answers for the given creators purely from B. Errors if any
// creator cannot be fully enumerated (budget must cover the preimage).
std::vector<ApiAnswer> emulate_api(ScrapeSource& scrape,
                                   std::span<const CreatorId> creators);

// Two declared sample sets an intermediate proxy cannot tell apart; when the
// decision function agrees on both, the API adds nothing to the decision.
struct TwoCandidateInstance {
  std::vector<std::pair<Count, Money>> candidate;
  std::vector<std::pair<Count, Money>> alternative;
};

bool decisions_agree(const TwoCandidateInstance& instance);
TwoCandidateInstance builtin_nonnecessity_instance();
bool two_candidate_nonnecessity_demo();

}  // namespace auditlab
