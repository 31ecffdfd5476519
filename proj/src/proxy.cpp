#include "auditlab/proxy.hpp"

#include <sstream>

#include "auditlab/rng.hpp"

namespace auditlab {

Reconstruction reconstruct(std::span<const ScrapAnswer> scraps) {
  if (scraps.empty()) throw InvalidArgument("cannot reconstruct from an empty scrap set");
  const CreatorId creator = scraps.front().creator_id;
  Reconstruction rec;
  for (const ScrapAnswer& s : scraps) {
    if (s.creator_id != creator)
      throw InvalidArgument("scrap set mixes creators " + std::to_string(creator) +
                            " and " + std::to_string(s.creator_id));
    rec.popularity += s.views;
    rec.earnings += s.views * s.rate;
  }
  return rec;
}

std::optional<ConsistencyFlag> check_consistency(const ApiAnswer& answer,
                                                 std::span<const ScrapAnswer> scraps,
                                                 bool complete) {
  const Reconstruction rec = reconstruct(scraps);
  if (scraps.front().creator_id != answer.creator_id)
    throw InvalidArgument("scraps belong to creator " +
                          std::to_string(scraps.front().creator_id) +
                          ", answer to " + std::to_string(answer.creator_id));

  bool flagged;
  if (complete) {
    flagged = rec.popularity != answer.popularity || rec.earnings != answer.earnings;
  } else {
    // Partial coverage reconstructs lower bounds, so only an excess is sound.
    flagged = rec.earnings > answer.earnings || rec.popularity > answer.popularity;
  }
  if (!flagged) return std::nullopt;
  return ConsistencyFlag{answer.creator_id, answer, rec, complete};
}

nlohmann::json ConsistencyReport::to_json() const {
  nlohmann::json flag_array = nlohmann::json::array();
  for (const ConsistencyFlag& f : flags) {
    flag_array.push_back({{"creator_id", f.creator_id},
                          {"declared_popularity", f.declared.popularity},
                          {"declared_earnings", f.declared.earnings},
                          {"reconstructed_popularity", f.reconstructed.popularity},
                          {"reconstructed_earnings", f.reconstructed.earnings},
                          {"complete", f.complete}});
  }
  return nlohmann::json{{"checked_creators", checked_creators},
                        {"flags", std::move(flag_array)},
                        {"any_inconsistent", any_inconsistent()}};
}

std::string ConsistencyReport::to_csv() const {
  std::ostringstream out;
  out << "creator_id,declared_e,reconstructed_e,complete\n";
  for (const ConsistencyFlag& f : flags) {
    out << f.creator_id << ',' << f.declared.earnings << ','
        << f.reconstructed.earnings << ',' << (f.complete ? 1 : 0) << '\n';
  }
  return out.str();
}

double poor_proxy_score(std::uint64_t input_space_size) {
  if (input_space_size == 0)
    throw InvalidArgument("poor proxy needs a nonempty input space");
  return 1.0 / static_cast<double>(input_space_size);
}

ProxySpec ProxySpec::perfect() {
  ProxySpec spec;
  spec.kind = Kind::Perfect;
  spec.zeta = 0.5;
  return spec;
}

ProxySpec ProxySpec::poor(std::uint64_t input_space_size) {
  ProxySpec spec;
  spec.kind = Kind::Poor;
  spec.input_space_size = input_space_size;
  spec.zeta = poor_proxy_score(input_space_size) / 2.0;
  return spec;
}

ProxySpec ProxySpec::intermediate(
    std::string descriptor, double zeta,
    std::function<double(const ApiAnswer&, std::span<const ScrapAnswer>, bool)> scorer) {
  ProxySpec spec;
  spec.kind = Kind::Intermediate;
  spec.descriptor = std::move(descriptor);
  spec.zeta = zeta;
  spec.scorer = std::move(scorer);
  return spec;
}

ProxySpec ProxySpec::parse(const std::string& name, std::uint64_t input_space_size) {
  if (name == "perfect") return perfect();
  if (name == "poor") return poor(input_space_size);
  throw ParseError("unknown proxy: " + name);
}

double ProxySpec::score(const ApiAnswer& answer, std::span<const ScrapAnswer> scraps,
                        bool complete) const {
  switch (kind) {
    case Kind::Perfect:
      return check_consistency(answer, scraps, complete) ? 0.0 : 1.0;
    case Kind::Poor:
      return poor_proxy_score(input_space_size);
    case Kind::Intermediate:
      if (!scorer) throw InvalidArgument("intermediate proxy is missing its scorer");
      return scorer(answer, scraps, complete);
  }
  throw InvalidArgument("unreachable proxy kind");
}

bool ProxySpec::inconsistent(const ApiAnswer& answer,
                             std::span<const ScrapAnswer> scraps, bool complete) const {
  return score(answer, scraps, complete) < zeta;
}

std::string ProxySpec::name() const {
  switch (kind) {
    case Kind::Perfect: return "perfect";
    case Kind::Poor: return "poor";
    case Kind::Intermediate: return "intermediate:" + descriptor;
  }
  return "?";
}

CandidateSet CandidateSet::for_proxy(const ProxySpec& proxy) {
  switch (proxy.kind) {
    case ProxySpec::Kind::Perfect: return {Shape::Singleton};
    case ProxySpec::Kind::Poor: return {Shape::All};
    case ProxySpec::Kind::Intermediate: return {Shape::Pair};
  }
  throw InvalidArgument("unreachable proxy kind");
}

std::string CandidateSet::name() const {
  switch (shape) {
    case Shape::All: return "all";
    case Shape::Singleton: return "singleton";
    case Shape::Pair: return "pair";
  }
  return "?";
}

std::vector<ApiAnswer> emulate_api(ScrapeSource& scrape,
                                   std::span<const CreatorId> creators) {
  std::vector<ApiAnswer> answers;
  answers.reserve(creators.size());
  for (CreatorId c : creators) {
    const std::vector<VideoId> videos = scrape.videos_of(c);
    if (videos.empty())
      throw Error("cannot emulate creator " + std::to_string(c) +
                  ": B enumeration is incomplete");
    std::vector<ScrapAnswer> scraps;
    scraps.reserve(videos.size());
    for (VideoId v : videos) scraps.push_back(scrape.scrape(v));
    const Reconstruction rec = reconstruct(scraps);
    answers.push_back(ApiAnswer{c, rec.popularity, rec.earnings});
  }
  return answers;
}

bool decisions_agree(const TwoCandidateInstance& instance) {
  const ParityEstimate a = economic_parity(instance.candidate);
  const ParityEstimate b = economic_parity(instance.alternative);
  return a.decision == b.decision;
}

TwoCandidateInstance builtin_nonnecessity_instance() {
  // Two declared earning tables the proxy cannot distinguish; doubling every
  // earning preserves all strict orderings, so the decision cannot change.
  TwoCandidateInstance instance;
  instance.candidate = {{100, 1000}, {200, 5000}, {300, 2000}, {400, 8000}};
  for (const auto& [p, e] : instance.candidate)
    instance.alternative.emplace_back(p, e * 2);
  return instance;
}

bool two_candidate_nonnecessity_demo() {
  return decisions_agree(builtin_nonnecessity_instance());
}

}  // namespace auditlab
