#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "auditlab/error.hpp"
#include "auditlab/rng.hpp"

namespace auditlab {

using CreatorId = std::uint64_t;
using VideoId = std::uint64_t;
using Count = std::int64_t;
// Money is integer micro-dollars throughout; ground truth never touches
// floating point, so consistency checks can use exact equality.
using Money = std::int64_t;

// How many videos a creator publishes.
//
// "rev-trunc-exp": u ~ Exp(rate = parameter) conditioned on u <= 1, count =
// round(max * (1 - u)) clamped into [min, max]. Mass concentrates near max
// (most creators publish many videos). "plain-exp": count = round(w), w ~
// Exp(mean = parameter), clamped. Both readings of the generator are kept
// selectable.
struct VideoCountLaw {
  enum class Kind { ReversedTruncatedExponential, PlainExponential };

  Kind kind = Kind::ReversedTruncatedExponential;
  double parameter = 3.0;
  Count min_count = 1;
  Count max_count = 100;

  Count sample(Rng& rng) const;
  std::string str() const;
  static VideoCountLaw parse(const std::string& descriptor);

  bool operator==(const VideoCountLaw&) const = default;
};

struct GeneratorConfig {
  std::uint64_t n_creators = 1000;
  double privileged_fraction = 1.0 / 3.0;
  VideoCountLaw video_count_law{};
  Count views_min = 0;
  Count views_max = 1000;
  Money rate_privileged = 100000;  // $0.10 per view
  Money rate_regular = 10000;      // $0.01 per view
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidArgument

  bool operator==(const GeneratorConfig&) const = default;
};

struct Creator {
  CreatorId id = 0;
  bool privileged = false;
  Money rate = 0;
  std::vector<VideoId> video_ids;

  bool operator==(const Creator&) const = default;
};

struct Video {
  VideoId id = 0;
  CreatorId creator_id = 0;
  Count views = 0;
  Money rate = 0;

  bool operator==(const Video&) const = default;
};

// Immutable ground truth. Creator and video ids are dense (id == index), and
// the state is safe to share across concurrent audit runs once built.
class PlatformState {
public:
  static PlatformState generate(const GeneratorConfig& config);

  const GeneratorConfig& config() const { return config_; }
  const std::vector<Creator>& creators() const { return creators_; }
  const std::vector<Video>& videos() const { return videos_; }

  const Creator& creator(CreatorId id) const;  // throws UnknownId
  const Video& video(VideoId id) const;        // throws UnknownId

  Count true_popularity(CreatorId id) const;
  Money true_earnings(CreatorId id) const;
  // Fraction of creator pairs with p < p' whose earnings are ordered the
  // same way; shares the estimator kernel. Throws EstimatorError when no
  // pair has distinct popularity.
  double true_parity() const;

  nlohmann::json to_json() const;
  static PlatformState from_json(const nlohmann::json& doc);
  std::string serialize() const;  // versioned document, stable byte-for-byte
  static PlatformState deserialize(const std::string& text);

  bool operator==(const PlatformState&) const = default;

private:
  PlatformState() = default;
  void check_invariants() const;

  GeneratorConfig config_;
  std::vector<Creator> creators_;
  std::vector<Video> videos_;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

}  // namespace auditlab
