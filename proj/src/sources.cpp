#include "auditlab/sources.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "auditlab/util.hpp"

namespace auditlab {

namespace {

constexpr std::uint64_t kDemoteStream = 0x64656d6fULL;
constexpr std::uint64_t kPromoteStream = 0x70726f6dULL;

// One full bubble pass; returns whether anything moved.
bool bubble_pass(std::vector<Money>& values) {
  bool swapped = false;
  for (std::size_t j = 0; j + 1 < values.size(); ++j) {
    if (values[j] > values[j + 1]) {
      std::swap(values[j], values[j + 1]);
      swapped = true;
    }
  }
  return swapped;
}

std::vector<CreatorId> creators_by_popularity(const PlatformState& state) {
  std::vector<CreatorId> order(state.creators().size());
  std::iota(order.begin(), order.end(), CreatorId{0});
  std::vector<Count> popularity(order.size());
  for (CreatorId c : order) popularity[c] = state.true_popularity(c);
  std::stable_sort(order.begin(), order.end(), [&](CreatorId a, CreatorId b) {
    return popularity[a] < popularity[b];
  });
  return order;
}

}  // namespace

std::string ManipulationStrategy::kind_name(Kind kind) {
  switch (kind) {
    case Kind::None: return "none";
    case Kind::DemotePrivileged: return "demote-privileged";
    case Kind::PromoteRegular: return "promote-regular";
    case Kind::BubbleSwap: return "bubble-swap";
  }
  throw InvalidArgument("unreachable strategy kind");
}

std::string ManipulationStrategy::str() const {
  if (kind == Kind::None) return "none";
  std::ostringstream out;
  out << kind_name(kind) << ":x=" << x << ":seed=" << seed;
  return out.str();
}

ManipulationStrategy ManipulationStrategy::parse(const std::string& descriptor) {
  std::vector<std::string> parts;
  std::string token;
  std::istringstream in(descriptor);
  while (std::getline(in, token, ':')) parts.push_back(token);
  if (parts.empty()) throw ParseError("empty strategy descriptor");

  ManipulationStrategy s;
  const std::string& name = parts[0];
  if (name == "none") {
    s.kind = Kind::None;
  } else if (name == "demote-privileged") {
    s.kind = Kind::DemotePrivileged;
  } else if (name == "promote-regular") {
    s.kind = Kind::PromoteRegular;
  } else if (name == "bubble-swap" || name == "bubble") {
    s.kind = Kind::BubbleSwap;
  } else {
    throw ParseError("unknown strategy: " + name);
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto eq = parts[i].find('=');
    if (eq == std::string::npos)
      throw ParseError("strategy option needs key=value: " + parts[i]);
    const std::string key = parts[i].substr(0, eq);
    const std::string value = parts[i].substr(eq + 1);
    try {
      if (key == "x") {
        s.x = std::stod(value);
      } else if (key == "seed") {
        s.seed = std::stoull(value);
      } else {
        throw ParseError("unknown strategy option: " + key);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception&) {
      throw ParseError("malformed strategy option: " + parts[i]);
    }
  }
  if (s.x < 0.0 || s.x > 1.0) throw ParseError("strategy x must lie in [0, 1]");
  return s;
}

std::uint64_t passes_to_sort(std::span<const Money> values) {
  std::vector<Money> work(values.begin(), values.end());
  std::uint64_t passes = 0;
  while (bubble_pass(work)) ++passes;
  return passes;
}

std::vector<Money> build_declared_earnings(const PlatformState& state,
                                           const ManipulationStrategy& strategy) {
  if (strategy.x < 0.0 || strategy.x > 1.0)
    throw InvalidArgument("strategy x must lie in [0, 1]");

  const auto& creators = state.creators();
  std::vector<Money> declared(creators.size());
  for (const Creator& c : creators) declared[c.id] = state.true_earnings(c.id);

  switch (strategy.kind) {
    case ManipulationStrategy::Kind::None:
      break;

    case ManipulationStrategy::Kind::DemotePrivileged: {
      std::vector<CreatorId> pool;
      for (const Creator& c : creators)
        if (c.privileged) pool.push_back(c.id);
      Rng rng(derive_seed(strategy.seed, kDemoteStream));
      rng.shuffle(pool);
      const std::uint64_t hit = ceil_fraction(strategy.x, pool.size());
      for (std::uint64_t i = 0; i < hit; ++i)
        declared[pool[i]] =
            state.true_popularity(pool[i]) * state.config().rate_regular;
      break;
    }

    case ManipulationStrategy::Kind::PromoteRegular: {
      std::vector<CreatorId> pool;
      for (const Creator& c : creators)
        if (!c.privileged) pool.push_back(c.id);
      Rng rng(derive_seed(strategy.seed, kPromoteStream));
      rng.shuffle(pool);
      const std::uint64_t hit = ceil_fraction(strategy.x, pool.size());
      for (std::uint64_t i = 0; i < hit; ++i)
        declared[pool[i]] =
            state.true_popularity(pool[i]) * state.config().rate_privileged;
      break;
    }

    case ManipulationStrategy::Kind::BubbleSwap: {
      const std::vector<CreatorId> order = creators_by_popularity(state);
      std::vector<Money> list(order.size());
      for (std::size_t i = 0; i < order.size(); ++i)
        list[i] = state.true_earnings(order[i]);
      const std::uint64_t full = passes_to_sort(list);
      // Half-up rounding, so x = 1 always reaches the fully sorted list.
      const auto passes = static_cast<std::uint64_t>(
          std::llround(strategy.x * static_cast<double>(full)));
      for (std::uint64_t p = 0; p < passes; ++p)
        if (!bubble_pass(list)) break;
      for (std::size_t i = 0; i < order.size(); ++i) declared[order[i]] = list[i];
      break;
    }
  }
  return declared;
}

ManipulatedApi::ManipulatedApi(const PlatformState& state,
                               const ManipulationStrategy& strategy)
    : state_(&state),
      strategy_(strategy),
      declared_(build_declared_earnings(state, strategy)) {}

ApiAnswer ManipulatedApi::api_query(CreatorId id) {
  // The popularity declaration always equals ground truth; only earnings are
  // rewritten by the strategy table.
  return ApiAnswer{id, state_->true_popularity(id), declared_.at(id)};
}

ScrapAnswer scrape_query(const PlatformState& state, VideoId id) {
  const Video& v = state.video(id);
  return ScrapAnswer{v.id, v.views, v.rate, v.creator_id};
}

std::vector<CreatorId> PlatformScrapeSource::creator_catalog() {
  std::vector<CreatorId> ids(state_->creators().size());
  std::iota(ids.begin(), ids.end(), CreatorId{0});
  return ids;
}

std::vector<VideoId> PlatformScrapeSource::videos_of(CreatorId id) {
  return state_->creator(id).video_ids;
}

ScrapAnswer PlatformScrapeSource::scrape(VideoId id) {
  return scrape_query(*state_, id);
}

}  // namespace auditlab
