// Serial reference kernels against their OpenMP counterparts. Prints one line
// per kernel with the best-of-N wall time and whether the outputs agree.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "coirl/kernels/gemm.hpp"
#include "coirl/train/evaluation.hpp"
#include "coirl/world/collision.hpp"

using namespace coirl;

namespace {

double best_ms(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-22s serial %9.3f ms  parallel %9.3f ms  speedup %5.2fx  %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
  std::printf("threads: %d\n", omp_get_max_threads());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;

  {
    const std::size_t m = 256, k = 256, p = 256;
    std::vector<Real> a(m * k), b(k * p), c1(m * p), c2(m * p);
    for (auto& v : a) v = static_cast<Real>(nd(rng));
    for (auto& v : b) v = static_cast<Real>(nd(rng));
    kernels::GemmArgs args{a.data(), b.data(), c1.data(), m, k, p};
    const double s = best_ms(5, [&] { kernels::gemm_serial(args); });
    args.c = c2.data();
    const double q = best_ms(5, [&] { kernels::gemm_parallel(args); });
    report("gemm 256^3", s, q, c1 == c2);
  }

  world::DatasetSpec spec;
  spec.num_scenes = 60;
  spec.seed = 3;
  spec.domain_mix = world::DomainMix::parse("1:1");
  const auto data = world::make_dataset(spec);

  {
    std::vector<world::CollisionQuery> queries;
    for (const auto& rec : data.records) {
      auto pos = world::positions_from(rec.expert);
      for (auto& v : pos) v.y += 0.8 * nd(rng);
      queries.push_back({&data.scene_of(rec), rec.t, pos});
    }
    std::vector<world::CollisionReport> r1, r2;
    const double s = best_ms(5, [&] { r1 = world::check_collision_batch_serial(queries, data.world); });
    const double q = best_ms(5, [&] { r2 = world::check_collision_batch_parallel(queries, data.world); });
    bool same = r1.size() == r2.size();
    for (std::size_t i = 0; same && i < r1.size(); ++i) same = r1[i].collided == r2[i].collided;
    report("collision batch", s, q, same);
  }

  {
    model::ModelConfig cfg;
    const auto m = model::make_model(cfg, 2);
    std::vector<std::size_t> recs(data.records.size());
    for (std::size_t i = 0; i < recs.size(); ++i) recs[i] = i;
    const auto source = eval::policy_actions(m, model::ActorTag::kIL);
    eval::EvalResult r1, r2;
    const double s = best_ms(3, [&] { r1 = eval::evaluate_serial(source, data, recs); });
    const double q = best_ms(3, [&] { r2 = eval::evaluate_parallel(source, data, recs); });
    report("policy evaluation", s, q, eval::dump_csv(r1) == eval::dump_csv(r2));
  }
  return 0;
}
