// Voxel batch sampling, seeding rakes, training configuration and the
// training loop.
#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nsf/loss.hpp"
#include "nsf/optim.hpp"
#include "nsf/volume.hpp"

namespace nsf {

// ---------------------------------------------------------------- sampling

/// Default batch size: 1% of the voxel count, clamped to [1024, 10000].
inline int default_batch_size(std::size_t voxels) {
  return static_cast<int>(std::clamp<std::size_t>(voxels / 100, 1024, 10000));
}

/// Draws voxel-centre batches uniformly with replacement from the voxels
/// where every supplied field is non-degenerate.
template <class T>
class BatchSampler {
 public:
  /// `targets` supplies the per-sample vectors (V itself, or N for pss) and
  /// must share `field`'s dims.
  BatchSampler(const VectorField& field, const VectorField& targets) : field_(&field), targets_(&targets) {
    if (!(targets.dims() == field.dims())) throw ShapeError("target field dims differ from vector field dims");
    for (std::size_t n = 0; n < field.size(); ++n)
      if (norm(field[n].cast<double>()) >= kDegenerateNorm && norm(targets[n].cast<double>()) >= kDegenerateNorm)
        eligible_.push_back(n);
    if (eligible_.empty()) throw DataError("every voxel is degenerate; nothing to train on");
  }
  explicit BatchSampler(const VectorField& field) : BatchSampler(field, field) {}

  std::size_t eligible_count() const { return eligible_.size(); }

  void sample(std::mt19937_64& rng, int b, LossBatch<T>& out) const {
    if (b < 1) throw UsageError("batch size must be at least 1");
    out.points.resize(static_cast<std::size_t>(b));
    out.vectors.resize(static_cast<std::size_t>(b));
    for (std::size_t s = 0; s < out.points.size(); ++s) {
      const std::size_t n = eligible_[rng() % eligible_.size()];
      out.points[s] = field_->coord(n).template cast<T>();
      out.vectors[s] = (*targets_)[n].template cast<T>();
    }
  }

 private:
  const VectorField* field_;
  const VectorField* targets_;
  std::vector<std::size_t> eligible_;
};

/// One batch of `b` (P, W) pairs from `field`.
template <class T>
LossBatch<T> sample_batch(const VectorField& field, std::mt19937_64& rng, int b) {
  LossBatch<T> out;
  BatchSampler<T>(field).sample(rng, b, out);
  return out;
}

// ---------------------------------------------------------------- rakes

struct RakeSpec {
  enum class Kind { segment, circle };
  Kind kind = Kind::segment;
  Vec3d start{}, end{};                 // segment
  Vec3d center{}, normal{0, 0, 1};      // circle
  double radius = 0.0;                  // circle
  int sample_count = 1024;

  nlohmann::json to_json() const {
    nlohmann::json j;
    auto arr = [](const Vec3d& v) { return nlohmann::json::array({v.x, v.y, v.z}); };
    if (kind == Kind::segment) {
      j = {{"kind", "segment"}, {"start", arr(start)}, {"end", arr(end)}};
    } else {
      j = {{"kind", "circle"}, {"center", arr(center)}, {"normal", arr(normal)}, {"radius", radius}};
    }
    j["count"] = sample_count;
    return j;
  }

  static RakeSpec from_json(const nlohmann::json& j) {
    try {
      auto vec = [&](const char* key) {
        const auto& a = j.at(key);
        if (!a.is_array() || a.size() != 3) throw UsageError(std::string("rake '") + key + "' needs 3 numbers");
        return Vec3d{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
      };
      RakeSpec r;
      const std::string kind = j.at("kind").get<std::string>();
      if (kind == "segment") {
        r.kind = Kind::segment;
        r.start = vec("start");
        r.end = vec("end");
      } else if (kind == "circle") {
        r.kind = Kind::circle;
        r.center = vec("center");
        r.normal = vec("normal");
        r.radius = j.at("radius").get<double>();
      } else {
        throw UsageError("unknown rake kind '" + kind + "'");
      }
      r.sample_count = j.value("count", 1024);
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("malformed rake: ") + e.what());
    }
  }

  /// Inline forms `segment:x1,y1,z1,x2,y2,z2[,count]` and
  /// `circle:cx,cy,cz,nx,ny,nz,r[,count]`, or a JSON object.
  static RakeSpec parse(const std::string& text) {
    if (!text.empty() && text.front() == '{') {
      try {
        return from_json(nlohmann::json::parse(text));
      } catch (const nlohmann::json::parse_error& e) {
        throw UsageError(std::string("malformed rake JSON: ") + e.what());
      }
    }
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("rake must look like segment:... or circle:...");
    const std::string kind = text.substr(0, colon);
    std::vector<double> nums;
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        std::size_t used = 0;
        nums.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw UsageError("bad number '" + item + "' in rake");
      }
    }
    RakeSpec r;
    if (kind == "segment" && (nums.size() == 6 || nums.size() == 7)) {
      r.kind = Kind::segment;
      r.start = {nums[0], nums[1], nums[2]};
      r.end = {nums[3], nums[4], nums[5]};
      if (nums.size() == 7) r.sample_count = static_cast<int>(nums[6]);
    } else if (kind == "circle" && (nums.size() == 7 || nums.size() == 8)) {
      r.kind = Kind::circle;
      r.center = {nums[0], nums[1], nums[2]};
      r.normal = {nums[3], nums[4], nums[5]};
      r.radius = nums[6];
      if (nums.size() == 8) r.sample_count = static_cast<int>(nums[7]);
    } else {
      throw UsageError("rake '" + text + "' has the wrong kind or number count");
    }
    return r;
  }
};

/// Evenly spaced rake samples: segments include both endpoints, circles start
/// at angle 0 and do not repeat it.
inline std::vector<Vec3d> sample_rake(const RakeSpec& spec) {
  if (spec.sample_count < 1) throw UsageError("rake sample_count must be at least 1");
  const std::size_t n = static_cast<std::size_t>(spec.sample_count);
  std::vector<Vec3d> out(n);
  if (spec.kind == RakeSpec::Kind::segment) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = n == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(n - 1);
      out[i] = spec.start + (spec.end - spec.start) * t;
    }
  } else {
    if (spec.radius < 0.0) throw UsageError("rake radius must be non-negative");
    const double nn = norm(spec.normal);
    if (nn < kDegenerateNorm) throw UsageError("rake circle normal must be non-zero");
    const Vec3d axis = spec.normal * (1.0 / nn);
    const Vec3d helper = std::abs(axis.x) < 0.9 ? Vec3d{1, 0, 0} : Vec3d{0, 1, 0};
    Vec3d u = cross(axis, helper);
    u *= 1.0 / norm(u);
    const Vec3d v = cross(axis, u);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      out[i] = spec.center + (u * std::cos(a) + v * std::sin(a)) * spec.radius;
    }
  }
  for (const auto& p : out)
    for (std::size_t a = 0; a < 3; ++a)
      if (!(std::abs(p[a]) <= 1.0 + 1e-12)) throw UsageError("rake leaves the [-1,1]^3 domain");
  return out;
}

// ---------------------------------------------------------------- config

struct TrainConfig {
  LossKind loss = LossKind::perp;
  Architecture arch{};
  int iterations = 10000;
  std::optional<int> batch_size;  // default_batch_size(voxels) when unset
  LrSchedule schedule{};
  AdamParams adam{};
  std::optional<RakeSpec> rake;
  std::uint64_t seed = 0;
  double seeds_weight = 1.0;
  bool seeds_signed = false;
  bool normalize_v = false;
  int log_every = 100;

  int resolved_batch(std::size_t voxels) const { return batch_size ? *batch_size : default_batch_size(voxels); }

  void validate() const {
    arch.validate();
    if (iterations < 1) throw UsageError("iterations must be at least 1");
    if (batch_size && *batch_size < 1) throw UsageError("batch size must be at least 1");
    if (!(schedule.lr0 > 0.0)) throw UsageError("learning rate must be positive");
    if (!(seeds_weight >= 0.0)) throw UsageError("seeds weight must be non-negative");
    if (uses_seeds(loss) && !rake) throw UsageError("loss '" + to_string(loss) + "' needs a rake");
  }

  nlohmann::json to_json() const {
    nlohmann::json j = {{"loss", to_string(loss)},
                        {"hidden_layers", arch.hidden_layers},
                        {"width", arch.width},
                        {"omega0", arch.omega0},
                        {"iterations", iterations},
                        {"lr", schedule.lr0},
                        {"decay_every", schedule.decay_every},
                        {"decay_factor", schedule.decay_factor},
                        {"adam_beta1", adam.beta1},
                        {"adam_beta2", adam.beta2},
                        {"adam_epsilon", adam.epsilon},
                        {"seed", seed},
                        {"seeds_weight", seeds_weight},
                        {"seeds_signed", seeds_signed},
                        {"normalize_v", normalize_v},
                        {"log_every", log_every}};
    j["batch"] = batch_size ? nlohmann::json(*batch_size) : nlohmann::json(nullptr);
    j["rake"] = rake ? rake->to_json() : nlohmann::json(nullptr);
    return j;
  }

  /// Overlays the keys present in `j` onto `*this`; unknown keys are ignored
  /// so one flat config file can serve every subcommand.
  void merge_json(const nlohmann::json& j) {
    try {
      if (j.contains("loss")) loss = parse_loss_kind(j["loss"].get<std::string>());
      if (j.contains("hidden_layers")) arch.hidden_layers = j["hidden_layers"].get<int>();
      if (j.contains("width")) arch.width = j["width"].get<int>();
      if (j.contains("omega0")) arch.omega0 = j["omega0"].get<double>();
      if (j.contains("iterations")) iterations = j["iterations"].get<int>();
      if (j.contains("batch")) {
        if (j["batch"].is_null())
          batch_size.reset();
        else
          batch_size = j["batch"].get<int>();
      }
      if (j.contains("lr")) schedule.lr0 = j["lr"].get<double>();
      if (j.contains("decay_every")) schedule.decay_every = j["decay_every"].get<int>();
      if (j.contains("decay_factor")) schedule.decay_factor = j["decay_factor"].get<double>();
      if (j.contains("adam_beta1")) adam.beta1 = j["adam_beta1"].get<double>();
      if (j.contains("adam_beta2")) adam.beta2 = j["adam_beta2"].get<double>();
      if (j.contains("adam_epsilon")) adam.epsilon = j["adam_epsilon"].get<double>();
      if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
      if (j.contains("seeds_weight")) seeds_weight = j["seeds_weight"].get<double>();
      if (j.contains("seeds_signed")) seeds_signed = j["seeds_signed"].get<bool>();
      if (j.contains("normalize_v")) normalize_v = j["normalize_v"].get<bool>();
      if (j.contains("log_every")) log_every = j["log_every"].get<int>();
      if (j.contains("rake")) {
        const auto& r = j["rake"];
        if (r.is_null())
          rake.reset();
        else
          rake = r.is_string() ? RakeSpec::parse(r.get<std::string>()) : RakeSpec::from_json(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(std::string("bad config value: ") + e.what());
    }
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.merge_json(j);
    return c;
  }
};

// ---------------------------------------------------------------- training

struct StepRecord {
  int iteration = 0;
  double lr = 0.0;
  LossParts loss;
  double wall_seconds = 0.0;
};

/// Header plus one row per record: iteration,lr,total,main,seeds,wall_s.
inline std::string history_csv(const std::vector<StepRecord>& history) {
  std::ostringstream os;
  os.precision(9);
  os << "iteration,lr,loss_total,loss_main,loss_seeds,wall_s\n";
  for (const auto& r : history)
    os << r.iteration << ',' << r.lr << ',' << r.loss.total << ',' << r.loss.main << ',' << r.loss.seeds << ','
       << r.wall_seconds << '\n';
  return os.str();
}

template <class T>
struct TrainResult {
  StreamNet<T> net;
  std::vector<StepRecord> history;
};

using ProgressFn = std::function<void(const StepRecord&)>;

/// Trains a stream-function network on `field`.
///
/// For pss losses `normals` must hold the principal normal field
/// (frenet_normal); it is computed here when omitted. The result is a
/// deterministic function of (field, config).
template <class T = float>
TrainResult<T> train(const VectorField& field, const TrainConfig& config, const VectorField* normals = nullptr,
                     const ProgressFn& progress = {}) {
  config.validate();
  if (!all_finite(field)) throw DataError("vector field contains non-finite values");

  std::optional<VectorField> computed_normals;
  const VectorField* targets = &field;
  if (uses_pss(config.loss)) {
    if (!normals) {
      computed_normals = frenet_normal(field).normal;
      normals = &*computed_normals;
    }
    targets = normals;
  }
  const BatchSampler<T> sampler(field, *targets);

  std::vector<Vec3<T>> seeds;
  if (uses_seeds(config.loss))
    for (const auto& p : sample_rake(*config.rake)) seeds.push_back(p.template cast<T>());

  StreamNet<T> net = init_stream_net<T>(config.arch, config.seed);
  AdamState<T> adam(net.params().size(), config.adam);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  const int b = config.resolved_batch(field.size());
  const LossOptions opts{config.seeds_weight, config.seeds_signed};

  LossBatch<T> batch;
  LossGradient<T> lg;
  std::vector<T> grad(net.params().size());
  TrainResult<T> result{net, {}};
  result.history.reserve(static_cast<std::size_t>(config.iterations));
  const auto t0 = std::chrono::steady_clock::now();

  for (int it = 0; it < config.iterations; ++it) {
    sampler.sample(rng, b, batch);
    if (config.normalize_v && uses_perp(config.loss))
      for (auto& v : batch.vectors) v = (v.template cast<double>() * (1.0 / norm(v.template cast<double>()))).template cast<T>();
    const double lr = config.schedule.at(it);
    LossParts parts;
    try {
      parts = lg.compute(net, config.loss, batch, seeds, opts, grad);
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ", lr " + std::to_string(lr) + ": " + e.what());
    }
    bool finite = std::isfinite(parts.total);
    for (T g : grad) finite = finite && std::isfinite(g);
    if (!finite) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << it << " (lr " << lr << ", main " << parts.main << ", seeds "
         << parts.seeds << ", total " << parts.total << ")";
      throw NumericError(os.str());
    }
    adam_step<T>(net.params(), grad, adam, lr);
    StepRecord rec{it, lr, parts, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    result.history.push_back(rec);
    if (progress && config.log_every > 0 && (it % config.log_every == 0 || it + 1 == config.iterations))
      progress(rec);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace nsf
