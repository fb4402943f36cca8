// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit status 0 iff all pass.
//
//   daks_acceptance [configs-dir] [out-dir]

#include "invariants.hpp"

#include "daks/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace daks;

namespace {

struct Line {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

std::vector<Line> lines;
fs::path configs_dir;
fs::path out_root;

void report(int id, std::string name, bool passed, std::string detail)
{
    std::cout << "criterion " << id << ' ' << (passed ? "PASS" : "FAIL") << "  " << name << ": " << detail << std::endl;
    lines.push_back({id, std::move(name), passed, std::move(detail)});
}

std::string fmt(double v, int prec = 4)
{
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

SweepResult sweep(const std::string& file)
{
    auto spec = load_sweep(configs_dir / file);
    spec.out_dir = (out_root / spec.name).string();
    SweepOptions opts;
    const auto t0 = std::chrono::steady_clock::now();
    auto res = run_sweep(spec, opts);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "  [" << spec.name << ": " << res.trials.size() << " runs in " << fmt(dt, 3) << " s]" << std::endl;
    for (const auto& p : res.adversary_problems) {
        std::cout << "  refused n=" << p.n << " seed=" << p.seed << ": " << p.message << std::endl;
    }
    return res;
}

Criterion make(CriterionKind kind, const std::string& model)
{
    Criterion c;
    c.id = model;
    c.kind = kind;
    c.model = model;
    return c;
}

void noise_free_exactness()
{
    const auto res = sweep("noise-free.toml");
    std::size_t exact = 0;
    std::size_t total = 0;
    std::ostringstream per_n;
    for (std::size_t i = 0; i < res.trials.size(); ++i) {
        const auto& r = res.trials[i].record;
        const bool ok = !r.truncated && r.all_halted && r.agreement && r.all_correct &&
                        r.metrics.survivor_count == r.n;
        exact += ok ? 1 : 0;
        ++total;
    }
    const bool passed = res.adversary_problems.empty() && total == 80 && exact == total;
    report(1, "noise-free exactness (n = t in {1,16,64,256}, 20 seeds)", passed,
           std::to_string(exact) + "/" + std::to_string(total) +
               " runs with every processor halted, identical results, equal to ground truth (required: all 80)");
}

std::vector<RunRecord> correctness(int id, const std::string& file, double min, const std::string& what,
                                   bool rounds_bound)
{
    const auto res = sweep(file);
    const auto records = res.records();
    auto c = make(CriterionKind::CorrectFraction, records.empty() ? "" : records.front().model);
    c.min = min;
    const auto frac = evaluate(c, records);
    bool passed = res.adversary_problems.empty() && frac.passed;
    std::string detail = "all-correct fraction " + fmt(frac.measured) + " over " + std::to_string(records.size()) +
                         " runs (required >= " + fmt(min) + ")";
    if (rounds_bound) {
        auto rb = c;
        rb.kind = CriterionKind::RoundsBound;
        rb.factor = 64.0;
        auto nt = c;
        nt.kind = CriterionKind::NoTruncation;
        const auto rounds = evaluate(rb, records);
        const auto trunc = evaluate(nt, records);
        passed = passed && rounds.passed && trunc.passed;
        detail += "; max rounds/n " + fmt(rounds.measured) + " (required <= 64), truncated " + fmt(trunc.measured);
    }
    report(id, what, passed, detail);
    return records;
}

std::vector<RunRecord> scaling(int id, const std::string& file, Normalizer norm, double max, const std::string& what)
{
    const auto res = sweep(file);
    const auto records = res.records();
    const std::string model = records.empty() ? "" : records.front().model;
    bool passed = res.adversary_problems.empty() && res.truncated == 0;
    std::string detail;
    for (const char* metric : {"work", "msgs"}) {
        auto c = make(CriterionKind::RatioSpread, model);
        c.metric = metric;
        c.normalizer = norm;
        c.max = max;
        const auto r = evaluate(c, records);
        passed = passed && r.passed;
        detail += std::string(detail.empty() ? "" : "; ") + metric + " spread " + fmt(r.measured) + " (" +
                  r.detail.substr(r.detail.find(';') + 2) + ")";
    }
    detail += "; required <= " + fmt(max);
    report(id, what, passed, detail);
    return records;
}

void cascade(const std::vector<RunRecord>& runs)
{
    Criterion c;
    c.id = "cascade";
    c.kind = CriterionKind::TerminationCascade;
    c.factor = 5.0;
    c.min = 0.99;
    const auto r = evaluate(c, runs);
    report(6, "termination cascade over the runs of criteria 2-5", r.passed,
           "fraction " + fmt(r.measured) + " of " + std::to_string(runs.size()) +
               " runs with last_halt - first_enlightened <= 5 ceil(log2 n) (required >= 0.99)");
}

void chunking()
{
    const auto a = expand(load_sweep(configs_dir / "chunking-t1.toml"));
    const auto b = expand(load_sweep(configs_dir / "chunking-t4.toml"));
    std::size_t ok = 0;
    std::string first_problem;
    const std::size_t pairs = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto ra = run(a[i]);
        const auto rb = run(b[i]);
        const std::uint64_t scale = rb.chunks.chunk_size / ra.chunks.chunk_size;
        std::string problem;
        if (a[i].seed != b[i].seed || a[i].n != b[i].n || scale != (b[i].t + b[i].n - 1) / b[i].n) {
            problem = "configs do not pair up";
        } else if (ra.metrics.msgs_share != rb.metrics.msgs_share || ra.metrics.msgs_profess != rb.metrics.msgs_profess) {
            problem = "message totals differ";
        } else if (rb.metrics.time_units != scale * ra.metrics.time_units) {
            problem = "time_units do not scale by ceil(t/n)";
        } else if (ra.metrics.first_enlightened_round != rb.metrics.first_enlightened_round ||
                   ra.metrics.last_halt_round != rb.metrics.last_halt_round || ra.traces.size() != rb.traces.size()) {
            problem = "phase-transition rounds differ";
        } else {
            for (std::size_t k = 0; k < ra.traces.size(); ++k) {
                if (ra.traces[k].newly_enlightened != rb.traces[k].newly_enlightened ||
                    ra.traces[k].newly_halted != rb.traces[k].newly_halted ||
                    ra.traces[k].crashed != rb.traces[k].crashed) {
                    problem = "per-round phase transitions differ at round " + std::to_string(k + 1);
                    break;
                }
            }
        }
        if (problem.empty()) {
            ++ok;
        } else if (first_problem.empty()) {
            first_problem = "seed " + std::to_string(a[i].seed) + ": " + problem;
        }
    }
    const bool passed = pairs == 20 && a.size() == b.size() && ok == pairs;
    report(7, "chunking neutrality (n = 64, t in {64, 256}, 20 seeds)", passed,
           std::to_string(ok) + "/" + std::to_string(pairs) +
               " seed pairs with equal messages, time_units x4 and identical phase transitions" +
               (first_problem.empty() ? "" : "; first mismatch: " + first_problem));
}

void invariants_suite()
{
    std::size_t cases = 0;
    std::size_t checks = 0;
    std::size_t violations = 0;
    std::string first;
    auto absorb = [&](const invariants::CaseReport& r) {
        ++cases;
        checks += r.checks;
        violations += r.violations.size();
        if (first.empty() && !r.violations.empty()) {
            first = "case " + std::to_string(r.case_seed) + " (n = " + std::to_string(r.n) + "): " + r.violations.front();
        }
    };
    for (std::uint64_t k = 1; k <= 1000; ++k) {
        absorb(invariants::check_run_invariants(k));
    }
    for (std::uint64_t k = 1; k <= 2000; ++k) {
        absorb(invariants::check_prefix_validation(k));
    }
    report(8, "invariant suite (n <= 32 random instances)", violations == 0 && cases >= 1000,
           std::to_string(cases) + " cases, " + std::to_string(checks) + " checks, " + std::to_string(violations) +
               " violations (required 0)" + (first.empty() ? "" : "; first: " + first));
}

template <class F>
void guarded(int id, const std::string& name, F&& f)
{
    try {
        f();
    } catch (const std::exception& e) {
        report(id, name, false, std::string("error: ") + e.what());
    }
}

}  // namespace

int main(int argc, char** argv)
{
    configs_dir = argc > 1 ? fs::path(argv[1]) : fs::path(DAKS_SOURCE_DIR) / "configs";
    out_root = argc > 2 ? fs::path(argv[2]) : fs::path("acceptance-out");
    const auto t0 = std::chrono::steady_clock::now();

    guarded(1, "noise-free exactness", noise_free_exactness);

    std::vector<RunRecord> cascade_runs;
    auto keep = [&](const std::vector<RunRecord>& r) { cascade_runs.insert(cascade_runs.end(), r.begin(), r.end()); };
    guarded(2, "correctness under mfp", [&] {
        keep(correctness(2, "mfp-cliff.toml", 0.98,
                         "correctness under mfp (n = t = 256, eps = 0.5, cliff to 16 survivors, avg p 0.3, 200 seeds)",
                         false));
    });
    guarded(3, "correctness under mpl", [&] {
        keep(correctness(3, "mpl-cliff.toml", 0.95,
                         "correctness under mpl (n = t = 1024, c = 1, cliff to 10 survivors, avg p 0.3, 100 seeds)",
                         true));
    });
    guarded(4, "fault-free cost", [&] {
        keep(scaling(4, "fault-free.toml", Normalizer::NLogN, 3.0,
                     "fault-free cost / (n log2 n), n in {64..1024}, 20 seeds"));
    });
    guarded(5, "mfp cost scaling", [&] {
        keep(scaling(5, "mfp-scaling.toml", Normalizer::NLogNLogLogN, 4.0,
                     "mfp cliff cost / (n log2 n log2 log2 n), n in {64..1024}, 20 seeds"));
    });
    guarded(6, "termination cascade", [&] { cascade(cascade_runs); });
    guarded(7, "chunking neutrality", chunking);
    guarded(8, "invariant suite", invariants_suite);

    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto passed = std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.passed; });
    std::cout << "\nsummary: " << passed << "/" << lines.size() << " criteria passed in " << fmt(dt, 3) << " s\n";
    for (const auto& l : lines) {
        std::cout << "  " << l.id << ' ' << (l.passed ? "PASS" : "FAIL") << '\n';
    }
    return passed == static_cast<long>(lines.size()) && lines.size() == 8 ? 0 : 1;
}
