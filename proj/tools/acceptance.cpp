// Acceptance runner: executes the eleven top-level criteria and prints one
// verdict line per criterion, with the individual report lines indented
// beneath it. Exit status is zero iff every gating check passed.
//
// Usage: occlab_acceptance [--criterion N] [--seed S] [--workers W]
//                          [--tol-scale X]

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "occlab/verify.hpp"
#include "occlab/version.hpp"

namespace {

using occlab::SuiteResult;
using occlab::TestReport;
using occlab::VerifyOptions;

struct Criterion {
  int id;
  const char* title;
  const char* suite;
  // Empty prefix takes every report in the suite; otherwise only reports
  // whose name starts with the prefix belong to this criterion.
  const char* prefix;
};

const Criterion kCriteria[] = {
    {1, "uniform closed forms", "uniform-closed-forms", ""},
    {2, "route equivalence", "route-equivalence", "route-"},
    {3, "brute-force enumeration oracle", "route-equivalence", "enumeration-"},
    {4, "monte carlo vs exact laws", "mc-vs-exact", ""},
    {5, "empty-box limit laws", "gem-k0", ""},
    {6, "last-box limit laws", "z-limits", ""},
    {7, "last-box index vs renewal count", "equivalence-kstar-renewal", ""},
    {8, "gaussian trend and shape transfer", "clt-trend", ""},
    {9, "mittag-leffler regime", "mittag-leffler", ""},
    {10, "divergence and degeneracy", "divergence-examples", ""},
    {11, "determinism across worker counts", "determinism", ""},
};

bool starts_with(const std::string& s, const char* prefix) {
  return s.rfind(prefix, 0) == 0;
}

int usage(const char* argv0) {
  std::fprintf(stderr,
               "usage: %s [--criterion N] [--seed S] [--workers W] "
               "[--tol-scale X]\n",
               argv0);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  VerifyOptions opt;
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    auto next = [&](const char* what) -> const char* {
      if (i + 1 >= argc) {
        std::fprintf(stderr, "missing value for %s\n", what);
        std::exit(2);
      }
      return argv[++i];
    };
    if (arg == "--criterion") {
      only = std::atoi(next("--criterion"));
      if (only < 1 || only > 11) {
        std::fprintf(stderr, "criterion must be 1..11\n");
        return 2;
      }
    } else if (arg == "--seed") {
      opt.seed = std::strtoull(next("--seed"), nullptr, 10);
    } else if (arg == "--workers") {
      opt.workers = std::atoi(next("--workers"));
    } else if (arg == "--tol-scale") {
      opt.tol_scale = std::strtod(next("--tol-scale"), nullptr);
    } else {
      return usage(argv[0]);
    }
  }

  std::printf("acceptance run  version=%s seed=%llu workers=%d tol-scale=%g\n",
              occlab::version(),
              static_cast<unsigned long long>(opt.seed), opt.workers,
              opt.tol_scale);

  std::map<std::string, std::shared_ptr<SuiteResult>> cache;
  auto suite_of = [&](const std::string& name, int criterion) {
    // Criteria 2 and 3 each run their own half of the route-equivalence
    // suite so either can respect its own time budget standalone.
    std::string key = name;
    occlab::RoutePart part = occlab::RoutePart::All;
    if (name == "route-equivalence") {
      part = criterion == 3 ? occlab::RoutePart::Enumeration
                            : occlab::RoutePart::Recursions;
      key += criterion == 3 ? ":enumeration" : ":recursions";
    }
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto res = std::make_shared<SuiteResult>(
        name == "route-equivalence"
            ? occlab::suite_route_equivalence(opt, part)
            : occlab::run_suite(name, opt));
    cache.emplace(key, res);
    return res;
  };

  bool all_pass = true;
  for (const Criterion& c : kCriteria) {
    if (only != 0 && c.id != only) continue;
    std::shared_ptr<SuiteResult> suite;
    try {
      suite = suite_of(c.suite, c.id);
    } catch (const std::exception& e) {
      std::printf("criterion %02d FAIL  %s: exception: %s\n", c.id, c.title,
                  e.what());
      all_pass = false;
      continue;
    }
    bool pass = true;
    int gating = 0;
    std::vector<const TestReport*> mine;
    for (const TestReport& r : suite->reports) {
      if (c.prefix[0] != '\0' && !starts_with(r.name, c.prefix)) continue;
      mine.push_back(&r);
      if (occlab::report_gates(r)) {
        ++gating;
        pass = pass && r.pass;
      }
    }
    std::printf("criterion %02d %s  %s (%d gating checks, %.1fs suite)\n",
                c.id, pass ? "pass" : "FAIL", c.title, gating,
                suite->seconds);
    for (const TestReport* r : mine) {
      std::printf("    %s\n", r->human_line().c_str());
    }
    all_pass = all_pass && pass;
  }
  return all_pass ? 0 : 1;
}
