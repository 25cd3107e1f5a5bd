#include <benchmark/benchmark.h>

#include "pgg/actor_critic.hpp"
#include "pgg/envs.hpp"
#include "pgg/rollout.hpp"
#include "pgg/tabular.hpp"
#include "pgg/trainer.hpp"

namespace {

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  pgg::Rng rng(1);
  const pgg::Tensor w = pgg::Tensor::parameter({64, 64}, pgg::orthogonal_init(64, 64, 1.0, rng), "w");
  const pgg::Tensor x = pgg::Tensor::from({n, 64}, std::vector<double>(n * 64, 0.1));
  for (auto _ : state) {
    w.node()->grad.assign(64 * 64, 0.0);
    pgg::backward(pgg::sum(pgg::tanh(pgg::matmul(x, w))));
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(1)->Arg(128)->Arg(2048);

void BM_ActorForwardSingle(benchmark::State& state) {
  pgg::Rng rng(1);
  pgg::ActorCritic model({4, true, 2, 0, 64, true}, rng);
  const std::vector<double> obs{0.01, -0.02, 0.03, 0.0};
  for (auto _ : state) benchmark::DoNotOptimize(model.actor_forward(obs));
}
BENCHMARK(BM_ActorForwardSingle);

void BM_GuidedPpoMinibatch(benchmark::State& state) {
  pgg::TrainConfig config = pgg::TrainConfig::defaults_for("cartpole");
  config.gamma_train = 1.1;
  pgg::PggTrainer trainer(config);
  trainer.collect_rollout();
  const auto adv = trainer.compute_advantages();
  std::vector<std::size_t> idx(128);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const auto mb = pgg::gather_minibatch(trainer.buffer(), adv, idx, true, true);
  const auto rule = [](const pgg::Tensor& c, const pgg::Tensor& u, double g) {
    return pgg::guided_logits(c, u, g);
  };
  for (auto _ : state) {
    trainer.optimizer().zero_grad();
    const auto loss = pgg::guided_ppo_loss(trainer.model(), mb, config, 1.1, rule);
    pgg::backward(loss.total);
    benchmark::DoNotOptimize(loss.total.item());
  }
}
BENCHMARK(BM_GuidedPpoMinibatch);

void BM_CartPoleIteration(benchmark::State& state) {
  pgg::TrainConfig config = pgg::TrainConfig::defaults_for("cartpole");
  pgg::PggTrainer trainer(config);
  for (auto _ : state) trainer.run_iteration();
  state.SetItemsProcessed(state.iterations() * config.batch_size());
}
BENCHMARK(BM_CartPoleIteration)->Unit(benchmark::kMillisecond);

void BM_EnvStep(benchmark::State& state) {
  const std::string names[] = {"cartpole", "acrobot", "pendulum", "mountaincar-cont"};
  auto env = pgg::make_env(names[state.range(0)]);
  env->reset(1);
  const std::vector<double> action{env->action_space().discrete ? 1.0 : 0.5};
  for (auto _ : state) {
    auto r = env->step(action);
    if (r.done()) env->reset();
  }
  state.SetLabel(names[state.range(0)]);
}
BENCHMARK(BM_EnvStep)->DenseRange(0, 3);

void BM_Gae(benchmark::State& state) {
  const std::size_t t = 2048;
  std::vector<double> r(t, 1.0), v(t, 0.5), boot{0.5};
  std::vector<std::uint8_t> d(t, 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pgg::compute_gae(r, v, d, boot, 1, 0.99, 0.95));
  }
}
BENCHMARK(BM_Gae);

void BM_ZCancellation(benchmark::State& state) {
  pgg::Rng rng(3);
  const auto mdp = pgg::tabular::random_mdp(8, 4, 0.9, rng);
  const auto policy = pgg::tabular::random_policy(8, 4, 1.3, rng);
  for (auto _ : state) benchmark::DoNotOptimize(pgg::tabular::z_term_cancellation(mdp, policy).gap);
}
BENCHMARK(BM_ZCancellation);

}  // namespace

BENCHMARK_MAIN();
