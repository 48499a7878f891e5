#include "support.hpp"

#include <cstdlib>
#include <sstream>

#include "ixy/bench.hpp"

using namespace ixy;

namespace {

BenchConfig small(std::size_t batch, std::uint64_t pps = saturating_pps, double secs = 0.002) {
    BenchConfig c;
    c.batch = batch;
    c.offered_pps = pps;
    c.secs = secs;
    return c;
}

std::vector<std::string> csv_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

} // namespace

TEST_SUITE("bench") {

TEST_CASE("offered count") {
    CHECK(small(1, 1000, 0.1).offered_count() == 100);
    CHECK(small(1, 29'760'000, 0.01).offered_count() == 297'600);
    CHECK(small(1, 0, 1.0).offered_count() == 0);
    CHECK_ERROR_KIND(small(1, 1000, 0).offered_count(), ErrorKind::invalid_argument);
}

TEST_CASE("zero load forwards nothing") {
    const auto r = run_scenario(small(32, 0));
    CHECK(r.offered == 0);
    CHECK(r.forwarded == 0);
    CHECK(r.latency.empty());
    CHECK(r.window_rate_pps() == 0);
}

TEST_CASE("every offered frame is forwarded or dropped") {
    for (const std::size_t batch : {1u, 4u, 32u, 256u}) {
        for (const std::uint64_t pps : {std::uint64_t{1'000'000}, saturating_pps}) {
            const auto r = run_scenario(small(batch, pps));
            CHECK(r.offered == r.forwarded + r.dev_drops + r.app_drops);
            CHECK(r.latency.size() == r.forwarded);
        }
    }
}

TEST_CASE("at low load nothing is dropped and latency stays within one loop") {
    BenchConfig c = small(32, 1'000'000, 0.005);
    const auto r = run_scenario(c);
    CHECK(r.forwarded == r.offered);
    CHECK(r.latency.percentile(q99) <= service_bound_ps(c));
}

TEST_CASE("under overload latency is bounded by the buffers in flight") {
    BenchConfig c = small(32, saturating_pps, 0.005);
    const auto r = run_scenario(c);
    CHECK(r.dev_drops > 0);
    const std::uint64_t per_packet = service_bound_ps(c) / c.batch;
    CHECK(r.latency.percentile(q50) <= 1088 * per_packet);
    CHECK(r.latency.percentile(q50) >= 256 * per_packet);
}

TEST_CASE("batching raises throughput and amortizes tail writes") {
    const auto r1 = run_scenario(small(1));
    const auto r32 = run_scenario(small(32));
    CHECK(r32.window_rate_pps() >= r1.window_rate_pps());
    REQUIRE(r1.window_forwarded > 0);
    REQUIRE(r32.window_forwarded > 0);
    // Batch 1 pays two tail writes per packet.
    CHECK(r1.window_tail_writes == 2 * r1.window_forwarded);
    CHECK(r32.window_tail_writes * 16 * r1.window_forwarded <= r1.window_tail_writes * r32.window_forwarded);
}

TEST_CASE("buffers outside a pool never exceed its capacity") {
    for (const std::size_t batch : {1u, 32u, 256u}) {
        const auto r = run_scenario(small(batch));
        CHECK(r.pool_capacity == 2 * 512 + 2 * batch);
        CHECK(r.peak_outside_pool <= r.pool_capacity);
        CHECK(r.peak_outside_pool <= 1088u);
        CHECK(r.peak_outside_pool >= 511u);
    }
}

TEST_CASE("runs are deterministic") {
    const auto a = run_scenario(small(8));
    const auto b = run_scenario(small(8));
    CHECK(a.forwarded == b.forwarded);
    CHECK(a.latency.sorted() == b.latency.sorted());
    CHECK(a.virtual_ps == b.virtual_ps);
    CHECK(a.model_tail_writes == b.model_tail_writes);
}

TEST_CASE("checked and wrapping loops agree") {
    const auto c = run_scenario_with<CheckedArith>(small(8));
    const auto w = run_scenario_with<WrappingArith>(small(8));
    CHECK(c.forwarded == w.forwarded);
    CHECK(c.latency.sorted() == w.latency.sorted());
}

TEST_CASE("sweep") {
    const auto records = sweep_batches({4, 1, 4, 2}, small(1, 1'000'000, 0.001));
    REQUIRE(records.size() == 3);
    CHECK(records[0].batch == 4);
    CHECK(records[1].batch == 1);
    CHECK(records[2].batch == 2);
    CHECK(records[0].scenario == "sweep");
    CHECK_ERROR_KIND(sweep_batches({1, 0}, small(1)), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(sweep_batches({257}, small(1)), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(run_scenario(small(0)), ErrorKind::invalid_argument);
}

TEST_CASE("service bound") {
    BenchConfig c;
    c.batch = 32;
    CHECK(service_bound_ps(c) == 2 * (2 * 20'000 + 2 * 100'000 + 32 * (20'000 + 2 * 10'000)));
}

TEST_CASE("overflow delta rules") {
    const auto same = overflow_delta(8, 10.0, 12.0, true);
    CHECK(same.delta == 0);
    CHECK(same.note == "identical");
    const auto noise = overflow_delta(8, 10.5, 10.0, false);
    CHECK(noise.delta == 0);
    CHECK(noise.note == "noise");
    const auto real = overflow_delta(8, 9.0, 10.0, false);
    CHECK(real.delta == doctest::Approx(0.1));
    CHECK(real.note.empty());
    CHECK_ERROR_KIND(overflow_delta(8, 1.0, 0.0, false), ErrorKind::invalid_argument);

    const auto identical = overflow_cost_with<WrappingArith, WrappingArith>(8, 1, small(8, saturating_pps, 0.001));
    CHECK(identical.delta == 0);
    CHECK(identical.note == "identical");
    CHECK(identical.checked_mpps > 0);
}

TEST_CASE("csv export") {
    const auto records = sweep_batches({1, 8, 32}, small(1, 1'000'000, 0.001));
    std::ostringstream out;
    export_csv(out, records);
    const auto lines = csv_lines(out.str());
    REQUIRE(lines.size() == 4);
    CHECK(lines[0] == bench_csv_header);
    CHECK(lines[1].rfind("sweep,1,512,1000000,0.001,1000,0,0,", 0) == 0);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        CHECK(std::count(lines[i].begin(), lines[i].end(), ',') == 16);
        CHECK(lines[i].substr(lines[i].size() - 3) == ",ns");
    }
    std::ostringstream again;
    export_csv(again, sweep_batches({1, 8, 32}, small(1, 1'000'000, 0.001)));
    CHECK(again.str() == out.str());

    std::ostringstream empty;
    export_csv(empty, {});
    CHECK(empty.str() == std::string(bench_csv_header) + "\n");

    std::ostringstream idle;
    export_csv(idle, {run_scenario(small(4, 0))});
    CHECK(csv_lines(idle.str())[1] == "run,4,512,0,0.002,0,0,0,,,,,,,,,ns");
}

TEST_CASE("latency values in csv are nanoseconds") {
    BenchRecord r;
    r.scenario = "x";
    r.latency = LatencyDistribution({1'500, 2'000'001});
    std::ostringstream out;
    export_csv(out, {r});
    const auto line = csv_lines(out.str())[1];
    CHECK(line == "x,0,0,0,0,0,0,0,1.500,2000.001,2000.001,2000.001,2000.001,2000.001,2000.001,2000.001,ns");
}

TEST_CASE("histogram and overflow csv") {
    std::ostringstream h;
    export_histogram_csv(h, LatencyDistribution({100, 900, 1'100, 5'000}), 1'000);
    CHECK(h.str() == "latency_ns,count\n0.000,2\n1.000,1\n5.000,1\n");
    std::ostringstream none;
    export_histogram_csv(none, LatencyDistribution{}, 1'000);
    CHECK(none.str() == "latency_ns,count\n");
    std::ostringstream o;
    export_overflow_csv(o, {overflow_delta(8, 9.0, 10.0, false)});
    CHECK(o.str() == "batch,checked_mpps,unchecked_mpps,delta,note\n8,9.0000,10.0000,0.100000,\n");
}

TEST_CASE("seed from the environment") {
    ::unsetenv("IXY_SEED");
    CHECK(seed_from_env(5) == 5);
    ::setenv("IXY_SEED", "1234", 1);
    CHECK(seed_from_env(5) == 1234);
    ::setenv("IXY_SEED", "12x", 1);
    CHECK(seed_from_env(5) == 5);
    ::unsetenv("IXY_SEED");
}

TEST_CASE("batch size lists") {
    CHECK(parse_sizes("1,2,4") == std::vector<std::size_t>{1, 2, 4});
    CHECK(parse_sizes("32") == std::vector<std::size_t>{32});
    CHECK_ERROR_KIND(parse_sizes(""), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(parse_sizes("1,,2"), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(parse_sizes("4k"), ErrorKind::invalid_argument);
}

}
