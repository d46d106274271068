#pragma once

// Experiment configuration and its JSON form. Every key is optional and
// falls back to the defaults below; unknown keys are rejected so typos fail
// loudly instead of silently running the default experiment.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "degenloop/datasets.hpp"
#include "degenloop/diffusion.hpp"
#include "degenloop/errors.hpp"
#include "degenloop/io.hpp"
#include "degenloop/metrics.hpp"

namespace degenloop {

using json = nlohmann::ordered_json;

// Class-concentrated injection: only model samples whose nearest mode
// (ring mode or flower class prototype) is `target_mode` enter the pool.
struct SkewSpec {
  std::size_t target_mode = 0;
  std::size_t max_rounds = 8;
};

struct EvolutionConfig {
  DatasetSpec dataset{};
  double alpha = 1.0;
  std::size_t generations = 4;
  TrainConfig train{};
  DenoiserArch model{};
  DiffusionSchedule schedule{};
  std::size_t sample_steps = 20;
  std::size_t eval_samples = 1024;
  std::size_t eval_set_size = 1024;
  std::uint64_t master_seed = 0;
  bool warm_start = false;
  std::optional<SkewSpec> skew;
  std::size_t n_projections = 128;
  std::optional<double> bandwidth;

  void validate() const {
    dataset.validate();
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("config: alpha must be a finite value >= 0");
    if (generations < 1) throw ConfigError("config: generations must be >= 1");
    train.validate();
    model.validate();
    schedule.validate();
    if (sample_steps < 1) throw ConfigError("config: sample_steps must be >= 1");
    if (eval_samples < 2) throw ConfigError("config: eval_samples must be >= 2");
    if (eval_set_size < 2) throw ConfigError("config: eval_set_size must be >= 2");
    if (n_projections < 1) throw ConfigError("config: n_projections must be >= 1");
    if (bandwidth && !(*bandwidth > 0.0)) throw ConfigError("config: bandwidth must be > 0");
    if (skew) {
      if (dataset.kind == DatasetKind::external) throw ConfigError("config: skew needs a dataset with known modes");
      const std::size_t modes =
          dataset.kind == DatasetKind::gaussian_ring ? dataset.ring.modes : dataset.flowers.petal_counts.size();
      if (skew->target_mode >= modes) throw ConfigError("config: skew target_mode out of range");
      if (skew->max_rounds < 1) throw ConfigError("config: skew max_rounds must be >= 1");
    }
  }
};

namespace detail {

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ConfigError("config: unknown key '" + k + "' in " + (where.empty() ? "top level" : where));
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline EvolutionConfig config_from_json(const json& j) {
  using detail::read_opt;
  using detail::reject_unknown;
  EvolutionConfig c;
  reject_unknown(j,
                 {"dataset", "alpha", "generations", "train", "model", "schedule", "sample_steps", "eval_samples",
                  "eval_set_size", "master_seed", "warm_start", "skew", "metrics"},
                 "");
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    reject_unknown(d, {"kind", "size", "ring", "flowers", "external"}, "dataset");
    std::string kind = to_string(c.dataset.kind);
    read_opt(d, "kind", kind);
    c.dataset.kind = parse_dataset_kind(kind);
    read_opt(d, "size", c.dataset.size);
    if (d.contains("ring")) {
      const auto& r = d.at("ring");
      reject_unknown(r, {"modes", "radius", "sigma"}, "dataset.ring");
      read_opt(r, "modes", c.dataset.ring.modes);
      read_opt(r, "radius", c.dataset.ring.radius);
      read_opt(r, "sigma", c.dataset.ring.sigma);
    }
    if (d.contains("flowers")) {
      const auto& f = d.at("flowers");
      reject_unknown(f, {"side", "petal_counts"}, "dataset.flowers");
      read_opt(f, "side", c.dataset.flowers.side);
      read_opt(f, "petal_counts", c.dataset.flowers.petal_counts);
    }
    if (d.contains("external")) {
      const auto& e = d.at("external");
      reject_unknown(e, {"path", "format"}, "dataset.external");
      read_opt(e, "path", c.dataset.external.path);
      std::string fmt = to_string(c.dataset.external.format);
      read_opt(e, "format", fmt);
      c.dataset.external.format = parse_external_format(fmt);
    }
  }
  read_opt(j, "alpha", c.alpha);
  read_opt(j, "generations", c.generations);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    reject_unknown(t,
                   {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "weight_decay", "shuffle",
                    "standardize", "cosine_decay", "final_lr_fraction"},
                   "train");
    read_opt(t, "epochs", c.train.epochs);
    read_opt(t, "batch_size", c.train.batch_size);
    read_opt(t, "learning_rate", c.train.optimizer.learning_rate);
    read_opt(t, "beta1", c.train.optimizer.beta1);
    read_opt(t, "beta2", c.train.optimizer.beta2);
    read_opt(t, "epsilon", c.train.optimizer.epsilon);
    read_opt(t, "weight_decay", c.train.optimizer.weight_decay);
    read_opt(t, "shuffle", c.train.shuffle);
    read_opt(t, "standardize", c.train.standardize);
    read_opt(t, "cosine_decay", c.train.cosine_decay);
    read_opt(t, "final_lr_fraction", c.train.final_lr_fraction);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"hidden", "embedding_dim", "min_frequency", "max_frequency"}, "model");
    read_opt(m, "hidden", c.model.hidden);
    read_opt(m, "embedding_dim", c.model.embedding.dim);
    read_opt(m, "min_frequency", c.model.embedding.min_frequency);
    read_opt(m, "max_frequency", c.model.embedding.max_frequency);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    reject_unknown(s, {"max_signal_rate", "min_signal_rate"}, "schedule");
    read_opt(s, "max_signal_rate", c.schedule.max_signal_rate);
    read_opt(s, "min_signal_rate", c.schedule.min_signal_rate);
  }
  read_opt(j, "sample_steps", c.sample_steps);
  read_opt(j, "eval_samples", c.eval_samples);
  read_opt(j, "eval_set_size", c.eval_set_size);
  read_opt(j, "master_seed", c.master_seed);
  read_opt(j, "warm_start", c.warm_start);
  if (j.contains("skew") && !j.at("skew").is_null()) {
    const auto& s = j.at("skew");
    reject_unknown(s, {"target_mode", "max_rounds"}, "skew");
    SkewSpec sk;
    read_opt(s, "target_mode", sk.target_mode);
    read_opt(s, "max_rounds", sk.max_rounds);
    c.skew = sk;
  }
  if (j.contains("metrics")) {
    const auto& m = j.at("metrics");
    reject_unknown(m, {"n_projections", "bandwidth"}, "metrics");
    read_opt(m, "n_projections", c.n_projections);
    if (m.contains("bandwidth") && !m.at("bandwidth").is_null()) {
      double h = 0.0;
      read_opt(m, "bandwidth", h);
      c.bandwidth = h;
    }
  }
  c.validate();
  return c;
}

inline EvolutionConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

inline json config_to_json(const EvolutionConfig& c) {
  json j;
  json d;
  d["kind"] = to_string(c.dataset.kind);
  d["size"] = c.dataset.size;
  d["ring"] = {{"modes", c.dataset.ring.modes}, {"radius", c.dataset.ring.radius}, {"sigma", c.dataset.ring.sigma}};
  d["flowers"] = {{"side", c.dataset.flowers.side}, {"petal_counts", c.dataset.flowers.petal_counts}};
  d["external"] = {{"path", c.dataset.external.path}, {"format", to_string(c.dataset.external.format)}};
  j["dataset"] = d;
  j["alpha"] = c.alpha;
  j["generations"] = c.generations;
  j["train"] = {{"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.optimizer.learning_rate},
                {"beta1", c.train.optimizer.beta1},
                {"beta2", c.train.optimizer.beta2},
                {"epsilon", c.train.optimizer.epsilon},
                {"weight_decay", c.train.optimizer.weight_decay},
                {"shuffle", c.train.shuffle},
                {"standardize", c.train.standardize},
                {"cosine_decay", c.train.cosine_decay},
                {"final_lr_fraction", c.train.final_lr_fraction}};
  j["model"] = {{"hidden", c.model.hidden},
                {"embedding_dim", c.model.embedding.dim},
                {"min_frequency", c.model.embedding.min_frequency},
                {"max_frequency", c.model.embedding.max_frequency}};
  j["schedule"] = {{"max_signal_rate", c.schedule.max_signal_rate}, {"min_signal_rate", c.schedule.min_signal_rate}};
  j["sample_steps"] = c.sample_steps;
  j["eval_samples"] = c.eval_samples;
  j["eval_set_size"] = c.eval_set_size;
  j["master_seed"] = c.master_seed;
  j["warm_start"] = c.warm_start;
  if (c.skew)
    j["skew"] = {{"target_mode", c.skew->target_mode}, {"max_rounds", c.skew->max_rounds}};
  else
    j["skew"] = nullptr;
  j["metrics"] = {{"n_projections", c.n_projections},
                  {"bandwidth", c.bandwidth ? json(*c.bandwidth) : json(nullptr)}};
  return j;
}

}  // namespace degenloop
