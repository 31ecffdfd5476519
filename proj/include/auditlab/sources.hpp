#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "auditlab/platform.hpp"

namespace auditlab {

struct ApiAnswer {
  CreatorId creator_id = 0;
  Count popularity = 0;
  Money earnings = 0;

  bool operator==(const ApiAnswer&) const = default;
};

struct ScrapAnswer {
  VideoId video_id = 0;
  Count views = 0;
  Money rate = 0;
  CreatorId creator_id = 0;

  bool operator==(const ScrapAnswer&) const = default;
};

struct ManipulationStrategy {
  enum class Kind { None, DemotePrivileged, PromoteRegular, BubbleSwap };

  Kind kind = Kind::None;
  double x = 0.0;  // fraction of the eligible subgroup, or of sort passes
  std::uint64_t seed = 0;

  // "demote-privileged:x=0.2:seed=7"; kinds: none, demote-privileged,
  // promote-regular, bubble-swap (alias: bubble).
  static ManipulationStrategy parse(const std::string& descriptor);
  std::string str() const;
  static std::string kind_name(Kind kind);

  bool operator==(const ManipulationStrategy&) const = default;
};

// The two query surfaces. The in-process platform and the wire client both
// implement them, so audits run identically over either.
class ApiSource {
public:
  virtual ~ApiSource() = default;
  virtual ApiAnswer api_query(CreatorId id) = 0;
};

class ScrapeSource {
public:
  virtual ~ScrapeSource() = default;
  // Catalog lookups are budget-free: the queryable input spaces are public.
  virtual std::vector<CreatorId> creator_catalog() = 0;
  virtual std::vector<VideoId> videos_of(CreatorId id) = 0;
  virtual ScrapAnswer scrape(VideoId id) = 0;
};

// Bubble passes (each touching at least one swap) needed to fully sort.
std::uint64_t passes_to_sort(std::span<const Money> values);

// Declared earnings per creator id. None: the truth. DemotePrivileged(x): the
// first ceil(x * n_priv) creators of a seeded shuffle of the privileged set
// declare popularity * rate_regular. PromoteRegular(x): symmetric with
// rate_privileged over the regular set. BubbleSwap(x): earnings listed in
// increasing-popularity order, round(x * n_full) bubble passes applied.
std::vector<Money> build_declared_earnings(const PlatformState& state,
                                           const ManipulationStrategy& strategy);

// A with a precomputed declared-earnings table, so repeated queries answer
// stably. Popularity is never manipulated.
class ManipulatedApi final : public ApiSource {
public:
  ManipulatedApi(const PlatformState& state, const ManipulationStrategy& strategy);

  ApiAnswer api_query(CreatorId id) override;
  const ManipulationStrategy& strategy() const { return strategy_; }

private:
  const PlatformState* state_;
  ManipulationStrategy strategy_;
  std::vector<Money> declared_;
};

// B is honest by assumption: answers are the exact ground-truth records.
ScrapAnswer scrape_query(const PlatformState& state, VideoId id);

class PlatformScrapeSource final : public ScrapeSource {
public:
  explicit PlatformScrapeSource(const PlatformState& state) : state_(&state) {}

  std::vector<CreatorId> creator_catalog() override;
  std::vector<VideoId> videos_of(CreatorId id) override;
  ScrapAnswer scrape(VideoId id) override;

private:
  const PlatformState* state_;
};

}  // namespace auditlab
