#include "support.hpp"

#include <regex>
#include <sstream>

#include "ixy/apps.hpp"
#include "ixy/frames.hpp"

using namespace ixy;

namespace {

ForwarderConfig model_pair() {
    ForwarderConfig c;
    c.dev_a = "model:0";
    c.dev_b = "model:1";
    c.duration = std::chrono::seconds(60);
    c.stats_interval = std::chrono::seconds(100);
    c.stop_when_drained = true;
    return c;
}

Platform two_models() {
    Platform p;
    p.add_model();
    p.add_model();
    return p;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

} // namespace

TEST_SUITE("apps") {

TEST_CASE("forwarded frames are the injected frames with one byte bumped") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    config.inject_a = 10000;
    config.seed = 77;
    const auto summary = run_forwarder(platform, config);
    CHECK(summary.injected_a == 10000);
    CHECK(summary.a_to_b.rx_packets == 10000);
    CHECK(summary.a_to_b.tx_packets == 10000);
    CHECK(summary.a_to_b.dev_drops == 0);
    CHECK(summary.a_to_b.app_drops == 0);

    const auto wire = platform.model(1)->capture();
    REQUIRE(wire.size() == 10000);
    const FrameGenerator gen(77, 60);
    for (std::size_t i = 0; i < wire.size(); ++i) {
        auto expected = gen.frame(static_cast<std::uint16_t>(i));
        expected[48] = static_cast<std::uint8_t>(expected[48] + 1);
        REQUIRE(wire[i].bytes == expected);
    }
    CHECK(platform.model(0)->capture().empty());
}

TEST_CASE("the touched byte wraps") {
    test::Pair pair;
    auto frame = test::pattern_frame(60, 0);
    frame[48] = 255;
    REQUIRE(pair.nic_a->inject(frame));
    pair.nic_a->step(10);
    DirectionSummary d;
    std::vector<PacketBuffer> bufs;
    CHECK(forward_step<CheckedArith>(*pair.a, *pair.b, bufs, 32, 48, d) == 1);
    pair.nic_b->step(10);
    const auto wire = pair.nic_b->capture();
    REQUIRE(wire.size() == 1);
    CHECK(wire[0].bytes[48] == 0);
    frame[48] = 0;
    CHECK(wire[0].bytes == frame);
    CHECK(d.rx_bytes == 60);
}

TEST_CASE("both directions at once") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    config.inject_a = 3000;
    config.inject_b = 2000;
    const auto s = run_forwarder(platform, config);
    CHECK(s.a_to_b.tx_packets == 3000);
    CHECK(s.b_to_a.tx_packets == 2000);
    CHECK(platform.model(1)->counters().tx_sent == 3000);
    CHECK(platform.model(0)->counters().tx_sent == 2000);
}

TEST_CASE("an idle forwarder prints two lines per interval") {
    Platform platform = two_models();
    ForwarderConfig config;
    config.dev_a = "model:0";
    config.dev_b = "model:1";
    config.duration = std::chrono::milliseconds(400);
    config.stats_interval = std::chrono::milliseconds(200);
    std::ostringstream out;
    config.stats_out = &out;
    const auto s = run_forwarder(platform, config);
    CHECK(s.intervals == 2);
    CHECK(s.a_to_b == DirectionSummary{});
    const auto lines = lines_of(out.str());
    REQUIRE(lines.size() == 4);
    const std::regex format(R"(\[model:[01]\] RX: 0\.00 Mpps, 0\.00 Mbit/s \| TX: 0\.00 Mpps, 0\.00 Mbit/s)");
    for (const auto& line : lines) {
        CHECK_MESSAGE(std::regex_match(line, format), line);
    }
    CHECK(lines[0].rfind("[model:0]", 0) == 0);
    CHECK(lines[1].rfind("[model:1]", 0) == 0);
}

TEST_CASE("overload drops are all accounted for") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    config.inject_a = 20000;
    config.inject_b = 20000;
    config.window = 0;
    const auto s = run_forwarder(platform, config);
    for (const auto* d : {&s.a_to_b, &s.b_to_a}) {
        CHECK(d->rx_packets + d->dev_drops == 20000);
        CHECK(d->rx_packets == d->tx_packets + d->app_drops);
    }
    CHECK(s.a_to_b.dev_drops > 0);
}

TEST_CASE("a stop predicate ends the run") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    config.stop_when_drained = false;
    config.inject_a = 1000;
    config.stop = [](const ForwarderSummary& s) { return s.a_to_b.tx_packets >= 500; };
    const auto s = run_forwarder(platform, config);
    CHECK(s.a_to_b.tx_packets >= 500);
    CHECK(s.elapsed_secs < 30);
}

TEST_CASE("forwarder configuration errors") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    SUBCASE("batch 0") { config.batch_size = 0; }
    SUBCASE("batch 257") { config.batch_size = 257; }
    SUBCASE("duration") { config.duration = std::chrono::seconds(0); }
    SUBCASE("interval") { config.stats_interval = std::chrono::seconds(-1); }
    SUBCASE("touch offset") { config.touch_offset = 60; }
    SUBCASE("frame size") { config.frame_size = 59; }
    CHECK_ERROR_KIND(run_forwarder(platform, config), ErrorKind::invalid_argument);
}

TEST_CASE("forwarding a device to itself fails") {
    Platform platform = two_models();
    ForwarderConfig config = model_pair();
    config.dev_b = "model:0";
    CHECK_ERROR_KIND(run_forwarder(platform, config), ErrorKind::already_open);
    config.dev_b = "model:9";
    CHECK_ERROR_KIND(run_forwarder(platform, config), ErrorKind::not_found);
}

TEST_CASE("stats line") {
    DeviceStats s;
    s.rx_packets = 14'880'952;
    s.rx_bytes = 14'880'952ull * 64;
    s.tx_packets = 1'000'000;
    s.tx_bytes = 60'000'000;
    CHECK(format_stats_line("0000:03:00.0", s, 1.0) ==
          "[0000:03:00.0] RX: 14.88 Mpps, 10000.00 Mbit/s | TX: 1.00 Mpps, 640.00 Mbit/s");
    CHECK(format_stats_line("model:0", s, 2.0) ==
          "[model:0] RX: 7.44 Mpps, 5000.00 Mbit/s | TX: 0.50 Mpps, 320.00 Mbit/s");
}

TEST_CASE("generator sends numbered frames") {
    Platform platform;
    platform.add_model();
    GeneratorConfig config;
    config.device = "model:0";
    config.count = 1000;
    config.frame_size = 64;
    config.seed = 3;
    CHECK(run_generator(platform, config) == 1000);
    const auto wire = platform.model(0)->capture();
    REQUIRE(wire.size() == 1000);
    const FrameGenerator gen(3, 64);
    for (std::size_t i = 0; i < wire.size(); ++i) {
        REQUIRE(read_sequence(wire[i].bytes) == i);
        REQUIRE(wire[i].bytes == gen.frame(static_cast<std::uint16_t>(i)));
    }
}

TEST_CASE("generator runs are reproducible") {
    const auto run = [] {
        Platform platform;
        platform.add_model();
        GeneratorConfig config;
        config.device = "model:0";
        config.count = 300;
        config.frame_size = 100;
        run_generator(platform, config);
        return platform.model(0)->capture();
    };
    CHECK(run() == run());
}

TEST_CASE("generator at a rate") {
    Platform platform;
    platform.add_model();
    GeneratorConfig config;
    config.device = "model:0";
    config.rate_pps = 2000;
    config.duration = std::chrono::milliseconds(250);
    const auto sent = run_generator(platform, config);
    CHECK(sent >= 400);
    CHECK(sent <= 510);
    CHECK(platform.model(0)->counters().tx_sent == sent);
}

TEST_CASE("generator configuration errors") {
    Platform platform;
    platform.add_model();
    GeneratorConfig config;
    config.device = "model:0";
    config.count = 10;
    SUBCASE("too small") { config.frame_size = 59; }
    SUBCASE("too large") { config.frame_size = 2049; }
    SUBCASE("no count or rate") { config.count.reset(); }
    SUBCASE("zero rate") { config.rate_pps = 0.0; }
    SUBCASE("batch") { config.batch_size = 0; }
    CHECK_ERROR_KIND(run_generator(platform, config), ErrorKind::invalid_argument);
    CHECK(platform.model(0)->counters().reg_writes == 0);
}

TEST_CASE("dump of a fresh device") {
    Platform platform;
    platform.add_model();
    const auto text = dump_device(platform, "model:0");
    CHECK(text.find("device: model:0 (model)") != std::string::npos);
    CHECK(text.find("link: up, 10000 Mbit/s") != std::string::npos);
    CHECK(text.find("mac: 02:00:00:00:00:00") != std::string::npos);
    CHECK(text.find("  rx_packets 0\n") != std::string::npos);
    CHECK(text.find("  tx_packets 0\n") != std::string::npos);
    CHECK(platform.model(0)->counters().reg_writes == 0);
}

TEST_CASE("dump after traffic reports and consumes the counters") {
    Platform platform;
    platform.add_model();
    GeneratorConfig config;
    config.device = "model:0";
    config.count = 123;
    config.frame_size = 100;
    run_generator(platform, config);
    const auto text = dump_device(platform, "model:0");
    CHECK(text.find("  tx_packets 123\n") != std::string::npos);
    CHECK(text.find("  tx_bytes 12300\n") != std::string::npos);
    CHECK(text.find("TDT0      0x06018 = 0x0000007b") != std::string::npos);
    const auto again = dump_device(platform, "model:0");
    CHECK(again.find("  tx_packets 0\n") != std::string::npos);
}

TEST_CASE("ensure_models") {
    Platform platform;
    ensure_models(platform, {"model:2", "0000:01:00.0", "model:0"});
    CHECK(platform.model_count() == 3);
    CHECK_ERROR_KIND(ensure_models(platform, {"bogus"}), ErrorKind::invalid_argument);
}

}
