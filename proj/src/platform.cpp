#include "auditlab/platform.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "auditlab/estimators.hpp"
#include "auditlab/util.hpp"

namespace auditlab {

namespace {

// Sub-stream tags for the generator.
constexpr std::uint64_t kPrivilegedStream = 0x7072697631ULL;
constexpr std::uint64_t kVideoStream = 0x7669647331ULL;

constexpr int kDocumentVersion = 1;

}  // namespace

Count VideoCountLaw::sample(Rng& rng) const {
  double raw = 0.0;
  switch (kind) {
    case Kind::ReversedTruncatedExponential: {
      // u ~ Exp(rate = parameter) conditioned on u <= 1, by inverse CDF.
      const double u01 = rng.uniform01();
      const double u = -std::log1p(-u01 * (1.0 - std::exp(-parameter))) / parameter;
      raw = std::round(static_cast<double>(max_count) * (1.0 - u));
      break;
    }
    case Kind::PlainExponential:
      raw = std::round(rng.exponential(1.0 / parameter));  // mean = parameter
      break;
  }
  const double clamped = std::clamp(raw, static_cast<double>(min_count),
                                    static_cast<double>(max_count));
  return static_cast<Count>(clamped);
}

std::string VideoCountLaw::str() const {
  const char* name =
      kind == Kind::ReversedTruncatedExponential ? "rev-trunc-exp" : "plain-exp";
  std::ostringstream out;
  out << name << ":" << parameter << ":" << min_count << ":" << max_count;
  return out.str();
}

VideoCountLaw VideoCountLaw::parse(const std::string& descriptor) {
  std::vector<std::string> parts;
  std::string token;
  std::istringstream in(descriptor);
  while (std::getline(in, token, ':')) parts.push_back(token);
  if (parts.empty()) throw ParseError("empty video-count law descriptor");

  VideoCountLaw law;
  if (parts[0] == "rev-trunc-exp") {
    law.kind = Kind::ReversedTruncatedExponential;
  } else if (parts[0] == "plain-exp") {
    law.kind = Kind::PlainExponential;
  } else {
    throw ParseError("unknown video-count law: " + parts[0]);
  }
  try {
    if (parts.size() > 1) law.parameter = std::stod(parts[1]);
    if (parts.size() > 2) law.min_count = std::stoll(parts[2]);
    if (parts.size() > 3) law.max_count = std::stoll(parts[3]);
  } catch (const std::exception&) {
    throw ParseError("malformed video-count law: " + descriptor);
  }
  if (parts.size() > 4) throw ParseError("malformed video-count law: " + descriptor);
  return law;
}

void GeneratorConfig::validate() const {
  if (n_creators == 0) throw InvalidArgument("empty platform: n_creators must be > 0");
  if (!(privileged_fraction > 0.0 && privileged_fraction < 1.0))
    throw InvalidArgument("privileged_fraction must lie strictly in (0, 1)");
  if (!(rate_privileged > rate_regular && rate_regular > 0))
    throw InvalidArgument("rates must satisfy rate_privileged > rate_regular > 0");
  if (video_count_law.min_count < 1)
    throw InvalidArgument("video count range lower bound must be >= 1");
  if (video_count_law.min_count > video_count_law.max_count)
    throw InvalidArgument("video count range is inverted");
  if (!(video_count_law.parameter > 0.0))
    throw InvalidArgument("video-count law parameter must be > 0");
  if (views_min < 0 || views_min > views_max)
    throw InvalidArgument("views range must satisfy 0 <= min <= max");
}

PlatformState PlatformState::generate(const GeneratorConfig& config) {
  config.validate();
  const std::uint64_t n = config.n_creators;

  // Privileged selection: Fisher-Yates prefix, so a larger fraction under the
  // same seed yields a superset.
  std::vector<CreatorId> order(n);
  std::iota(order.begin(), order.end(), CreatorId{0});
  Rng shuffle_rng(derive_seed(config.seed, kPrivilegedStream));
  shuffle_rng.shuffle(order);
  const std::uint64_t n_privileged = ceil_fraction(config.privileged_fraction, n);
  std::vector<char> privileged(n, 0);
  for (std::uint64_t i = 0; i < n_privileged; ++i) privileged[order[i]] = 1;

  PlatformState state;
  state.config_ = config;
  state.creators_.reserve(n);

  Rng video_rng(derive_seed(config.seed, kVideoStream));
  VideoId next_video = 0;
  for (CreatorId id = 0; id < n; ++id) {
    Creator c;
    c.id = id;
    c.privileged = privileged[id] != 0;
    c.rate = c.privileged ? config.rate_privileged : config.rate_regular;
    const Count count = config.video_count_law.sample(video_rng);
    c.video_ids.reserve(static_cast<std::size_t>(count));
    for (Count k = 0; k < count; ++k) {
      Video v;
      v.id = next_video++;
      v.creator_id = id;
      v.views = video_rng.uniform_int(config.views_min, config.views_max);
      v.rate = c.rate;
      c.video_ids.push_back(v.id);
      state.videos_.push_back(v);
    }
    state.creators_.push_back(std::move(c));
  }
  return state;
}

const Creator& PlatformState::creator(CreatorId id) const {
  if (id >= creators_.size())
    throw UnknownId("unknown creator id " + std::to_string(id));
  return creators_[id];
}

const Video& PlatformState::video(VideoId id) const {
  if (id >= videos_.size())
    throw UnknownId("unknown video id " + std::to_string(id));
  return videos_[id];
}

Count PlatformState::true_popularity(CreatorId id) const {
  const Creator& c = creator(id);
  Count total = 0;
  for (VideoId v : c.video_ids) total += videos_[v].views;
  return total;
}

Money PlatformState::true_earnings(CreatorId id) const {
  const Creator& c = creator(id);
  Money total = 0;
  for (VideoId v : c.video_ids) total += videos_[v].views * videos_[v].rate;
  return total;
}

double PlatformState::true_parity() const {
  std::vector<std::pair<Count, Money>> samples;
  samples.reserve(creators_.size());
  for (const Creator& c : creators_)
    samples.emplace_back(true_popularity(c.id), true_earnings(c.id));
  return economic_parity(samples).value;
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = nlohmann::json{{"n_creators", c.n_creators},
                     {"privileged_fraction", c.privileged_fraction},
                     {"video_count_law", c.video_count_law.str()},
                     {"views_min", c.views_min},
                     {"views_max", c.views_max},
                     {"rate_privileged", c.rate_privileged},
                     {"rate_regular", c.rate_regular},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  c = GeneratorConfig{};
  if (j.contains("n_creators")) c.n_creators = j.at("n_creators").get<std::uint64_t>();
  if (j.contains("privileged_fraction"))
    c.privileged_fraction = j.at("privileged_fraction").get<double>();
  if (j.contains("video_count_law"))
    c.video_count_law = VideoCountLaw::parse(j.at("video_count_law").get<std::string>());
  if (j.contains("views_min")) c.views_min = j.at("views_min").get<Count>();
  if (j.contains("views_max")) c.views_max = j.at("views_max").get<Count>();
  if (j.contains("rate_privileged"))
    c.rate_privileged = j.at("rate_privileged").get<Money>();
  if (j.contains("rate_regular")) c.rate_regular = j.at("rate_regular").get<Money>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
}

nlohmann::json PlatformState::to_json() const {
  nlohmann::json creators = nlohmann::json::array();
  for (const Creator& c : creators_) {
    creators.push_back({{"id", c.id},
                        {"privileged", c.privileged},
                        {"rate", c.rate},
                        {"video_ids", c.video_ids}});
  }
  nlohmann::json videos = nlohmann::json::array();
  for (const Video& v : videos_) {
    videos.push_back({{"id", v.id},
                      {"creator_id", v.creator_id},
                      {"views", v.views},
                      {"rate", v.rate}});
  }
  return nlohmann::json{{"version", kDocumentVersion},
                        {"config", config_},
                        {"creators", std::move(creators)},
                        {"videos", std::move(videos)}};
}

PlatformState PlatformState::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("version").get<int>() != kDocumentVersion)
      throw ParseError("unsupported platform document version");
    PlatformState state;
    state.config_ = doc.at("config").get<GeneratorConfig>();
    for (const auto& jc : doc.at("creators")) {
      Creator c;
      c.id = jc.at("id").get<CreatorId>();
      c.privileged = jc.at("privileged").get<bool>();
      c.rate = jc.at("rate").get<Money>();
      c.video_ids = jc.at("video_ids").get<std::vector<VideoId>>();
      state.creators_.push_back(std::move(c));
    }
    for (const auto& jv : doc.at("videos")) {
      Video v;
      v.id = jv.at("id").get<VideoId>();
      v.creator_id = jv.at("creator_id").get<CreatorId>();
      v.views = jv.at("views").get<Count>();
      v.rate = jv.at("rate").get<Money>();
      state.videos_.push_back(std::move(v));
    }
    state.check_invariants();
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed platform document: ") + e.what());
  }
}

void PlatformState::check_invariants() const {
  for (std::size_t i = 0; i < creators_.size(); ++i) {
    if (creators_[i].id != i) throw ParseError("creator ids must be dense and ordered");
    if (creators_[i].video_ids.empty())
      throw ParseError("creator " + std::to_string(i) + " has no videos");
  }
  std::vector<char> seen(videos_.size(), 0);
  for (std::size_t i = 0; i < videos_.size(); ++i) {
    const Video& v = videos_[i];
    if (v.id != i) throw ParseError("video ids must be dense and ordered");
    if (v.creator_id >= creators_.size())
      throw ParseError("video " + std::to_string(i) + " references a missing creator");
    if (v.rate != creators_[v.creator_id].rate)
      throw ParseError("video " + std::to_string(i) + " rate differs from its creator");
    if (v.views < config_.views_min || v.views > config_.views_max)
      throw ParseError("video " + std::to_string(i) + " views outside the configured range");
  }
  for (const Creator& c : creators_) {
    for (VideoId v : c.video_ids) {
      if (v >= videos_.size() || videos_[v].creator_id != c.id)
        throw ParseError("creator " + std::to_string(c.id) + " lists a foreign video");
      if (seen[v]) throw ParseError("video " + std::to_string(v) + " listed twice");
      seen[v] = 1;
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw ParseError("video " + std::to_string(i) + " not indexed by any creator");
}

std::string PlatformState::serialize() const { return to_json().dump(); }

PlatformState PlatformState::deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid platform JSON: ") + e.what());
  }
  return from_json(doc);
}

std::vector<double> parse_grid(const std::string& text) {
  const auto c1 = text.find(':');
  try {
    if (c1 == std::string::npos) return {std::stod(text)};
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ParseError("grid needs lo:hi:step: " + text);
    const double lo = std::stod(text.substr(0, c1));
    const double hi = std::stod(text.substr(c1 + 1, c2 - c1 - 1));
    const double step = std::stod(text.substr(c2 + 1));
    if (!(step > 0.0) || hi < lo) throw ParseError("bad grid bounds: " + text);
    // lo + i*step rather than accumulation, so long grids do not drift.
    const auto n = static_cast<long long>(std::floor((hi - lo) / step + 1e-9));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (long long i = 0; i <= n; ++i)
      out.push_back(std::min(lo + step * static_cast<double>(i), hi));
    return out;
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception&) {
    throw ParseError("malformed grid: " + text);
  }
}

}  // namespace auditlab
