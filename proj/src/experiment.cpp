#include "esdf/experiment.hpp"

#include "esdf/attribution.hpp"
#include "esdf/errors.hpp"
#include "esdf/numeric.hpp"

namespace esdf {

ExperimentConfig desk_experiment() {
  ExperimentConfig cfg;
  // Two delay regimes per speed value: same-day or a bump four to six days
  // out, which an exponential delay cannot represent.
  cfg.world.ctr_bias = 1.0;
  cfg.world.cvr_bias = -1.0;
  cfg.world.cvr_scale = 0.5;
  cfg.world.speed_scale = 3.0;
  cfg.world.speed_cvr_coupling = 0.0;
  cfg.world.late_bump = 6.0;
  cfg.world.late_bump_min_slot = 4;
  cfg.world.overflow_bias = -3.0;
  cfg.world.day1_mass_target = 0.75;
  cfg.train_days = 8;
  cfg.n_test = 200000;
  cfg.test_seed = kDeskTestSeed;
  cfg.train.learning_rate = 2e-3;
  cfg.train.batch_size = 256;
  cfg.train.epochs = 5;
  return cfg;
}

ExperimentData make_experiment_data(const ExperimentConfig& cfg,
                                    std::uint64_t data_seed) {
  if (cfg.train_days <= 0) throw ConfigError("train_days must be positive");
  ExperimentData out;
  const GenConfig world = make_gen_config(cfg.world);
  const std::int64_t spd = world.slots.seconds_per_slot;

  out.train_gen = world;
  out.train_gen.n_impressions = cfg.n_train;
  out.train_gen.start_ts = 0;
  out.train_gen.span_seconds = cfg.train_days * spd;
  out.train_gen.seed = mix_seed(data_seed, 1);
  out.observe_ts = out.train_gen.span_seconds;

  out.test_gen = world;
  out.test_gen.n_impressions = cfg.n_test;
  out.test_gen.start_ts = out.observe_ts;
  out.test_gen.span_seconds = spd;
  out.test_gen.first_sample_id = cfg.n_train;
  out.test_gen.seed = cfg.test_seed ? mix_seed(*cfg.test_seed, 2) : mix_seed(data_seed, 2);

  out.train = generate(out.train_gen);
  out.test = generate(out.test_gen);
  out.test_samples = snapshot(out.test.log.records, out.observe_ts,
                              {PolicyKind::GroundTruth, 7}, world.slots)
                         .samples;
  return out;
}

ObjectiveRun run_objective(const ExperimentData& data, const TrainConfig& cfg) {
  const auto& slots = data.train_gen.slots;
  const LabelPolicy policy = training_policy(cfg.objective);
  const auto snap = snapshot(data.train.log.records, data.observe_ts, policy, slots);

  TrainingData td{data.train.log.records, snap.samples, policy};
  EvalData ed{data.test.log.records, data.test_samples};
  ObjectiveRun run;
  run.result = train(cfg, data.train.log.schema, slots, td, &ed);
  run.report = evaluate(run.result.params, data.test.log.records, data.test_samples,
                        data.test.truth);
  run.report.objective = objective_name(cfg.objective);
  return run;
}

}  // namespace esdf
