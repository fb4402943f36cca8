// Runs one n = 64 instance under a fractional-polynomial cliff and prints
// when processors became enlightened and halted.

#include "daks/simulator.hpp"

#include <iostream>

int main()
{
    daks::ExperimentConfig config;
    config.n = 64;
    config.t = 256;
    config.seed = 7;
    config.adversary.model = daks::CrashModel::fractional_polynomial(0.5);
    config.adversary.schedule.kind = daks::Aggressiveness::Cliff;
    config.adversary.avg_p = 0.2;

    daks::World world(config);
    while (!world.finished()) {
        const auto& tr = world.step();
        if (!tr.crashed.empty() || !tr.newly_enlightened.empty() || !tr.newly_halted.empty()) {
            std::cout << "round " << tr.round << ": " << tr.crashed.size() << " crashed, "
                      << tr.newly_enlightened.size() << " enlightened, " << tr.newly_halted.size() << " halted\n";
        }
    }
    const auto out = world.outcome();
    std::cout << "rounds " << out.metrics.rounds << ", time " << out.metrics.time_units << ", work " << out.metrics.work
              << ", messages " << out.metrics.messages() << ", all correct: " << std::boolalpha << out.all_correct
              << '\n';
}
