// Wrap a density score with prediction-powered conformal p-values and
// decaying-memory LORD thresholds on a toy two-context Gaussian stream.

#include <iostream>

#include "ppcoad/ppcoad.hpp"

int main() {
    using namespace ppcoad;

    GaussianOracle world;
    Rng rng(7);

    std::vector<Observation> train, twin_train, validation;
    for (int i = 0; i < 800; ++i) train.push_back(world.nominal(world.context(rng), rng));
    for (int i = 0; i < 800; ++i) twin_train.push_back(world.nominal(world.context(rng), rng));
    for (int i = 0; i < 400; ++i) validation.push_back(world.nominal(world.context(rng), rng));

    const auto score = fit_density_score(train, world.contexts);
    auto twin = fit_twin(twin_train, 2, world.contexts, ContextMode::aware, rng);
    twin.perturb(0.5, 0.0);  // a deliberately imperfect twin
    const auto validity = assess_twin(twin, *score, validation, 500, 5.0, rng);
    for (std::size_t c = 0; c < world.contexts; ++c)
        std::cout << "context " << c << ": D = " << validity.gap[c] << ", gamma = " << validity.gamma[c] << '\n';

    Detector<> detector(DecayingLord(LordParams{0.1, 0.99, 1.0}), DetectorOptions{});
    MetricsTracker metrics(0.99, 1.0);
    std::size_t queries = 0;
    for (const auto& step : gaussian_synthetic_stream(world, 200, 1000, rng)) {
        const ContextId c = step.test.context();
        StepInput in;
        in.context = c;
        in.test_score = score->score(step.test);
        in.truth = step.test.truth();
        in.gamma = validity.gamma_at(c);
        in.synthetic_batch = [&] {
            std::vector<double> s;
            for (const auto& x : sample_synthetic(twin, c, 1000, rng)) s.push_back(score->score(x, c));
            return CalibrationBatch(std::move(s), BatchKind::synthetic);
        };
        in.real_batch = [&] {
            std::vector<double> s;
            for (const auto& o : step.calibration) s.push_back(score->score(o));
            return CalibrationBatch(std::move(s), BatchKind::real);
        };
        const auto rec = detector.step(in, rng);
        queries += rec.u;
        metrics.update(rec.decision, rec.truth, rec.u);
    }
    std::cout << "sFDR ratio " << metrics.sfdr_ratio() << ", power ratio " << metrics.power_ratio() << ", CDAR "
              << metrics.cdar() << ", real-data queries " << queries << " of 200\n";
}
