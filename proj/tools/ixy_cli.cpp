#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "ixy/apps.hpp"
#include "ixy/bench.hpp"
#include "ixy/error.hpp"

namespace {

struct Options {
    // fwd
    std::string dev_a;
    std::string dev_b;
    std::size_t batch = 32;
    std::uint32_t ring = 512;
    double secs = 10;
    double interval = 1;
    std::size_t touch_offset = 48;
    std::uint64_t inject = 0;
    std::size_t frame_size = 60;
    std::uint64_t seed = 1;
    std::string pcap;
    // gen
    std::string dev;
    std::uint64_t count = 0;
    double rate = 0;
    // bench
    std::string sizes = "1,2,4,8,16,32,64,128,256";
    std::string out;
    std::string hist;
    double bin_ns = 100;
    std::uint64_t pps = ixy::saturating_pps;
    std::size_t repeats = 5;
    std::size_t overflow_batch = 8;
    double bench_secs = 0.01;
};

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.flush();
    if (!out) {
        throw ixy::Error(ixy::ErrorKind::io_error, fmt::format("cannot write {}", path));
    }
}

ixy::ModelConfig cli_model_config(bool store_captures) {
    ixy::ModelConfig config;
    config.access_log = false;
    config.store_captures = store_captures;
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"User-space poll-mode driver tools"};
    app.require_subcommand(1);
    Options o;

    auto* fwd = app.add_subcommand("fwd", "Forward between two devices, bumping one byte per packet");
    fwd->add_option("--dev-a", o.dev_a, "First device (model:<n> or dddd:bb:dd.f)")->required();
    fwd->add_option("--dev-b", o.dev_b, "Second device")->required();
    fwd->add_option("--batch", o.batch, "Batch size")->capture_default_str();
    fwd->add_option("--ring", o.ring, "Ring size")->capture_default_str();
    fwd->add_option("--secs", o.secs, "Run time in seconds")->capture_default_str();
    fwd->add_option("--stats-interval", o.interval, "Seconds between statistics lines")->capture_default_str();
    fwd->add_option("--touch-offset", o.touch_offset, "Offset of the byte to increment")->capture_default_str();
    fwd->add_option("--inject", o.inject, "Model devices: frames to feed into each side")->capture_default_str();
    fwd->add_option("--size", o.frame_size, "Model devices: injected frame size")->capture_default_str();
    fwd->add_option("--seed", o.seed, "Model devices: payload seed")->capture_default_str();
    fwd->add_option("--pcap-out", o.pcap, "Model devices: write frames sent by device B");

    auto* gen = app.add_subcommand("gen", "Transmit seeded test frames with sequence numbers");
    gen->add_option("--dev", o.dev, "Device")->required();
    auto* count = gen->add_option("--count", o.count, "Frames to send");
    auto* rate = gen->add_option("--rate", o.rate, "Packets per second");
    gen->add_option("--secs", o.secs, "Run time when only --rate is given");
    gen->add_option("--size", o.frame_size, "Frame size in bytes")->capture_default_str();
    gen->add_option("--seed", o.seed, "Payload seed")->capture_default_str();
    gen->add_option("--batch", o.batch, "Batch size")->capture_default_str();
    gen->add_option("--pcap", o.pcap, "Model devices: write the transmitted frames");

    auto* dump = app.add_subcommand("dump", "Print registers, link state and statistics");
    dump->add_option("--dev", o.dev, "Device")->required();

    auto* bench = app.add_subcommand("bench", "Virtual-time benchmarks on a model device pair (seed: IXY_SEED)");
    bench->require_subcommand(1);
    auto* sweep = bench->add_subcommand("sweep", "Forwarding rate across batch sizes");
    sweep->add_option("--sizes", o.sizes, "Comma-separated batch sizes")->capture_default_str();
    sweep->add_option("--out", o.out, "CSV output")->required();
    sweep->add_option("--secs", o.bench_secs, "Offered interval in virtual seconds")->capture_default_str();
    sweep->add_option("--pps", o.pps, "Offered packets per second, both directions")->capture_default_str();
    sweep->add_option("--ring", o.ring, "Ring size")->capture_default_str();
    auto* latency = bench->add_subcommand("latency", "Per-packet latency distribution");
    latency->add_option("--pps", o.pps, "Offered packets per second, both directions")->required();
    latency->add_option("--secs", o.secs, "Offered interval in virtual seconds")->required();
    latency->add_option("--out", o.out, "CSV output")->required();
    latency->add_option("--hist", o.hist, "Histogram CSV output");
    latency->add_option("--bin-ns", o.bin_ns, "Histogram bin width in ns")->capture_default_str();
    latency->add_option("--batch", o.batch, "Batch size")->capture_default_str();
    latency->add_option("--ring", o.ring, "Ring size")->capture_default_str();
    auto* overflow = bench->add_subcommand("overflow", "Throughput cost of checked arithmetic");
    overflow->add_option("--out", o.out, "CSV output")->required();
    overflow->add_option("--batch", o.overflow_batch, "Batch size")->capture_default_str();
    overflow->add_option("--repeats", o.repeats, "Runs per mode")->capture_default_str();
    overflow->add_option("--secs", o.bench_secs, "Offered interval in virtual seconds")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (fwd->parsed()) {
            ixy::Platform platform;
            ixy::ensure_models(platform, {o.dev_a, o.dev_b}, cli_model_config(false));
            ixy::ForwarderConfig config;
            config.dev_a = o.dev_a;
            config.dev_b = o.dev_b;
            config.batch_size = o.batch;
            config.ring_size = o.ring;
            config.duration = std::chrono::duration<double>(o.secs);
            config.stats_interval = std::chrono::duration<double>(o.interval);
            config.touch_offset = o.touch_offset;
            config.inject_a = o.inject;
            config.inject_b = o.inject;
            config.frame_size = o.frame_size;
            config.seed = o.seed;
            config.pcap_out = o.pcap;
            config.stats_out = &std::cout;
            const ixy::ForwarderSummary s = ixy::run_forwarder(platform, config);
            for (const auto& [name, d] : {std::pair{"a->b", s.a_to_b}, std::pair{"b->a", s.b_to_a}}) {
                fmt::print("{}: rx {} tx {} app_drops {} dev_drops {}\n", name, d.rx_packets, d.tx_packets,
                           d.app_drops, d.dev_drops);
            }
        } else if (gen->parsed()) {
            ixy::Platform platform;
            ixy::ensure_models(platform, {o.dev}, cli_model_config(!o.pcap.empty()));
            ixy::GeneratorConfig config;
            config.device = o.dev;
            config.frame_size = o.frame_size;
            if (*count) {
                config.count = o.count;
            }
            if (*rate) {
                config.rate_pps = o.rate;
            }
            config.duration = std::chrono::duration<double>(o.secs);
            config.seed = o.seed;
            config.batch_size = o.batch;
            config.pcap_out = o.pcap;
            fmt::print("sent {}\n", ixy::run_generator(platform, config));
        } else if (dump->parsed()) {
            ixy::Platform platform;
            ixy::ensure_models(platform, {o.dev}, cli_model_config(false));
            fmt::print("{}", ixy::dump_device(platform, o.dev));
        } else if (sweep->parsed()) {
            ixy::BenchConfig base;
            base.seed = ixy::seed_from_env(base.seed);
            base.secs = o.bench_secs;
            base.offered_pps = o.pps;
            base.ring = o.ring;
            const auto records = ixy::sweep_batches(ixy::parse_sizes(o.sizes), base);
            ixy::export_csv(o.out, records);
            for (const auto& r : records) {
                fmt::print("batch {:3}: {:.3f} Mpps forwarded, {} dropped\n", r.batch, r.window_rate_pps() / 1e6,
                           r.dev_drops + r.app_drops);
            }
        } else if (latency->parsed()) {
            ixy::BenchConfig base;
            base.seed = ixy::seed_from_env(base.seed);
            base.batch = o.batch;
            base.ring = o.ring;
            const ixy::BenchRecord r = ixy::measure_latency(o.pps, o.secs, base);
            ixy::export_csv(o.out, {r});
            if (!o.hist.empty()) {
                std::ostringstream text;
                ixy::export_histogram_csv(text, r.latency, static_cast<std::uint64_t>(o.bin_ns * 1000));
                write_file(o.hist, text.str());
            }
            if (!r.latency.empty()) {
                fmt::print("{} samples, p50 {:.3f} us, p99.9999 {:.3f} us, max {:.3f} us\n", r.latency.size(),
                           static_cast<double>(r.latency.percentile(ixy::q50)) / 1e6,
                           static_cast<double>(r.latency.percentile(ixy::q999999)) / 1e6,
                           static_cast<double>(r.latency.max()) / 1e6);
            }
        } else if (overflow->parsed()) {
            ixy::BenchConfig base;
            base.seed = ixy::seed_from_env(base.seed);
            base.secs = o.bench_secs;
            const ixy::OverflowResult r = ixy::overflow_cost(o.overflow_batch, o.repeats, base);
            std::ostringstream text;
            ixy::export_overflow_csv(text, {r});
            write_file(o.out, text.str());
            fmt::print("batch {}: checked {:.3f} Mpps, unchecked {:.3f} Mpps, delta {:.2f}% {}\n", r.batch,
                       r.checked_mpps, r.unchecked_mpps, r.delta * 100, r.note);
        }
    } catch (const ixy::Error& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.kind() == ixy::ErrorKind::invalid_argument ? 2 : 1;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
