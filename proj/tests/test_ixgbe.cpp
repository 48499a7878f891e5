#include "support.hpp"

#include <random>

#include "ixy/ixgbe_regs.hpp"

using namespace ixy;

namespace {

std::vector<PacketBuffer> make_frames(const std::shared_ptr<Mempool>& pool, std::size_t n, std::size_t size,
                                      std::uint32_t seed = 0) {
    std::vector<PacketBuffer> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto buf = pool->alloc();
        REQUIRE_FALSE(buf.empty());
        const auto f = test::pattern_frame(size, seed + static_cast<std::uint32_t>(i));
        buf.write(0, f);
        buf.resize(f.size());
        out.push_back(std::move(buf));
    }
    return out;
}

std::uint64_t register_accesses(const ModelNic& nic) {
    const auto c = nic.counters();
    return c.reg_reads + c.reg_writes;
}

} // namespace

TEST_SUITE("ixgbe") {

TEST_CASE("init hands every slot but one to the device") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto& q = dev.rx_queue(0);
    const MmioRegion& r = rig.handle.registers();
    CHECK(r.read32(regs::RDH(0)) == 0);
    CHECK(r.read32(regs::RDT(0)) == 511);
    CHECK(r.read32(regs::RDLEN(0)) == 512 * 16);
    CHECK(q.buffers_in_custody() == 511);
    CHECK(q.slots[511].empty());
    for (std::uint32_t i = 0; i < 511; ++i) {
        REQUIRE(q.ring->load64(i * 16) == q.slots[i].device_address());
    }
    CHECK(dev.rx_pool(0)->outstanding() == 511);
    CHECK(dev.tx_queue(0).in_flight() == 0);
    CHECK(dev.tx_queue(0).free_slots() == 511);
    CHECK((r.read32(regs::RXCTRL) & regs::RXCTRL_RXEN) != 0);
    CHECK((r.read32(regs::SRRCTL(0)) & regs::SRRCTL_DROP_EN) != 0);
    CHECK(rig.nic->bus_master());
}

TEST_CASE("invalid configurations are rejected before touching the device") {
    test::Rig rig;
    DriverConfig config;
    SUBCASE("ring not a power of two") { config.ring_size = 500; }
    SUBCASE("ring too small") { config.ring_size = 32; }
    SUBCASE("ring too large") { config.ring_size = 8192; }
    SUBCASE("pool smaller than the ring") { config.pool_capacity = 100; }
    SUBCASE("entry size not a multiple of 1 KiB") { config.entry_size = 1500; }
    CHECK_ERROR_KIND(rig.init(config), ErrorKind::invalid_argument);
    CHECK(rig.nic->counters().reg_writes == 0);
    CHECK_FALSE(rig.handle.claimed());
}

TEST_CASE("queue counts") {
    test::Rig rig;
    CHECK_ERROR_KIND(IxgbeDevice(rig.handle, 0, 1), ErrorKind::invalid_argument);
    CHECK_ERROR_KIND(IxgbeDevice(rig.handle, 1, 2), ErrorKind::invalid_argument);
    auto& dev = rig.init();
    CHECK(dev.num_rx_queues() == 1);
    CHECK_ERROR_KIND(dev.rx_queue(1), ErrorKind::invalid_argument);
    std::vector<PacketBuffer> bufs;
    CHECK_ERROR_KIND(dev.rx_batch(3, bufs, 1), ErrorKind::invalid_argument);
}

TEST_CASE("a handle can be driven once") {
    test::Rig rig;
    rig.init();
    CHECK_ERROR_KIND(IxgbeDevice(rig.handle, 1, 1), ErrorKind::already_open);
}

TEST_CASE("init times out when the eeprom never finishes") {
    test::Rig rig;
    rig.nic->script_register(regs::EEC, RegisterBehavior::plain(0));
    bool timed_out = false;
    try {
        rig.init();
    } catch (const DeviceTimeout& e) {
        timed_out = true;
        CHECK(e.offset() == regs::EEC);
        CHECK(e.mask() == regs::EEC_ARD);
    }
    CHECK(timed_out);
}

TEST_CASE("init waits for a slow link") {
    test::Rig rig;
    rig.nic->script_register(regs::LINKS, RegisterBehavior::set_after_reads(regs::LINKS_UP | regs::LINKS_SPEED_10G, 4));
    rig.init();
    CHECK(rig.nic->reads_of(regs::LINKS) == 4);
}

TEST_CASE("frames arrive exactly and in order") {
    test::Rig rig;
    auto& dev = rig.init();
    std::vector<std::vector<std::uint8_t>> sent;
    for (std::uint32_t i = 0; i < 3; ++i) {
        sent.push_back(test::pattern_frame(60 + 100 * i, i));
        REQUIRE(rig.nic->inject(sent.back()));
    }
    rig.nic->step(10);
    std::vector<PacketBuffer> bufs;
    REQUIRE(dev.rx_batch(0, bufs, 32) == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(bufs[i].size() == sent[i].size());
        CHECK(std::vector<std::uint8_t>(bufs[i].frame().begin(), bufs[i].frame().end()) == sent[i]);
    }
    CHECK(dev.rx_queue(0).next_index == 3);
    CHECK(rig.handle.registers().read32(regs::RDT(0)) == 2);
}

TEST_CASE("rx_batch with max 0 or nothing pending touches no register") {
    test::Rig rig;
    auto& dev = rig.init();
    REQUIRE(rig.nic->inject(test::pattern_frame(60, 0)));
    rig.nic->step(10);
    const auto before = register_accesses(*rig.nic);
    std::vector<PacketBuffer> bufs;
    CHECK(dev.rx_batch(0, bufs, 0) == 0);
    CHECK(register_accesses(*rig.nic) == before);
    CHECK(dev.rx_batch(0, bufs, 32) == 1);
    const auto after = register_accesses(*rig.nic);
    CHECK(dev.rx_batch(0, bufs, 32) == 0);
    CHECK(register_accesses(*rig.nic) == after);
}

TEST_CASE("a burst drains in batches") {
    test::Rig rig;
    auto& dev = rig.init();
    for (int i = 0; i < 100; ++i) {
        REQUIRE(rig.nic->inject(test::pattern_frame(60, i)));
    }
    rig.nic->step(1000);
    std::vector<std::size_t> sizes;
    std::vector<PacketBuffer> bufs;
    for (;;) {
        bufs.clear();
        const std::size_t n = dev.rx_batch(0, bufs, 32);
        if (n == 0) {
            break;
        }
        sizes.push_back(n);
    }
    CHECK(sizes == std::vector<std::size_t>{32, 32, 32, 4});
    CHECK(rig.nic->writes_of(regs::RDT(0)) == 2 + 4);
}

TEST_CASE("the ring wraps many times without losing buffers") {
    test::Rig rig;
    auto& dev = rig.init();
    std::vector<PacketBuffer> bufs;
    std::uint32_t seq = 0;
    for (int round = 0; round < 50; ++round) {
        for (int i = 0; i < 100; ++i) {
            auto f = test::pattern_frame(64, 0);
            f[20] = static_cast<std::uint8_t>(seq >> 8);
            f[21] = static_cast<std::uint8_t>(seq);
            ++seq;
            REQUIRE(rig.nic->inject(f));
        }
        rig.nic->step(1000);
        bufs.clear();
        while (dev.rx_batch(0, bufs, 32) != 0) {
        }
        REQUIRE(bufs.size() == 100);
        for (std::size_t i = 0; i < 100; ++i) {
            const std::uint32_t expected = seq - 100 + static_cast<std::uint32_t>(i);
            REQUIRE(bufs[i].at(20) == static_cast<std::uint8_t>(expected >> 8));
            REQUIRE(bufs[i].at(21) == static_cast<std::uint8_t>(expected));
        }
    }
    bufs.clear();
    CHECK(dev.rx_queue(0).buffers_in_custody() == 511);
    CHECK(dev.rx_pool(0)->outstanding() == 511);
}

TEST_CASE("rx stops early when the pool has no replacement") {
    test::Rig rig;
    DriverConfig config;
    config.ring_size = 64;
    config.pool_capacity = 70;
    auto& dev = rig.init(config);
    for (int i = 0; i < 30; ++i) {
        REQUIRE(rig.nic->inject(test::pattern_frame(60, i)));
    }
    rig.nic->step(100);
    std::vector<PacketBuffer> held;
    CHECK(dev.rx_batch(0, held, 32) == 7);
    CHECK(dev.rx_pool(0)->free_count() == 0);
    const auto before = register_accesses(*rig.nic);
    CHECK(dev.rx_batch(0, held, 32) == 0);
    CHECK(register_accesses(*rig.nic) == before);
    held.pop_back();
    CHECK(dev.rx_batch(0, held, 32) == 1);
}

TEST_CASE("tx with nothing to send writes nothing") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto before = register_accesses(*rig.nic);
    std::vector<PacketBuffer> none;
    CHECK(dev.tx_batch(0, none) == 0);
    CHECK(register_accesses(*rig.nic) == before);
}

TEST_CASE("sent frames appear on the wire in order") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto pool = create_mempool(rig.handle, 64);
    auto bufs = make_frames(pool, 32, 128, 7);
    std::vector<std::vector<std::uint8_t>> expected;
    for (const auto& b : bufs) {
        expected.emplace_back(b.frame().begin(), b.frame().end());
    }
    const auto tdt_writes = rig.nic->writes_of(regs::TDT(0));
    CHECK(dev.tx_batch(0, bufs) == 32);
    CHECK(bufs.empty());
    CHECK(rig.nic->writes_of(regs::TDT(0)) - tdt_writes == 1);
    CHECK(rig.handle.registers().read32(regs::TDT(0)) == 32);
    CHECK(rig.nic->step(100) == 32);
    const auto wire = rig.nic->capture();
    REQUIRE(wire.size() == 32);
    for (std::size_t i = 0; i < 32; ++i) {
        CHECK(wire[i].bytes == expected[i]);
    }
    CHECK(dev.tx_clean_all(0) == 32);
    CHECK(pool->outstanding() == 0);
}

TEST_CASE("a full tx ring leaves the rest with the caller") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto pool = create_mempool(rig.handle, 700);
    auto bufs = make_frames(pool, 600, 60);
    CHECK(dev.tx_batch(0, bufs) == 511);
    CHECK(bufs.size() == 89);
    CHECK(dev.tx_queue(0).free_slots() == 0);
    const auto before = register_accesses(*rig.nic);
    CHECK(dev.tx_batch(0, bufs) == 0);
    CHECK(bufs.size() == 89);
    CHECK(register_accesses(*rig.nic) == before);
    rig.nic->step(1000);
    CHECK(dev.tx_batch(0, bufs) == 89);
    CHECK(dev.tx_queue(0).free_slots() == 511 - 89 - (511 - 480));
}

TEST_CASE("tx cleans completed descriptors in chunks") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto pool = create_mempool(rig.handle, 200);
    auto bufs = make_frames(pool, 40, 60);
    dev.tx_batch(0, bufs);
    rig.nic->step(100);
    CHECK(pool->outstanding() == 40);
    auto one = make_frames(pool, 1, 60);
    dev.tx_batch(0, one);
    // One chunk of 32 is returned, the remaining 8 wait for the next full chunk.
    CHECK(pool->outstanding() == 41 - 32);
    CHECK(dev.tx_queue(0).clean_index == 32);
}

TEST_CASE("an invalid tx batch changes no state") {
    test::Rig rig;
    auto& dev = rig.init();
    const auto pool = create_mempool(rig.handle, 8);
    auto bufs = make_frames(pool, 3, 60);
    SUBCASE("too short") { bufs[1].resize(59); }
    SUBCASE("empty handle") { pool->free(std::move(bufs[2])); }
    const auto before = register_accesses(*rig.nic);
    const std::size_t size_before = bufs.size();
    CHECK_THROWS_AS(dev.tx_batch(0, bufs), Error);
    CHECK(bufs.size() == size_before);
    CHECK(dev.tx_queue(0).next_index == 0);
    CHECK(register_accesses(*rig.nic) == before);
}

TEST_CASE("statistics are deltas since the last read") {
    test::Rig rig;
    auto& dev = rig.init();
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(rig.nic->inject(test::pattern_frame(100, i)));
        if (i % 100 == 99) {
            rig.nic->step(1000);
            std::vector<PacketBuffer> bufs;
            while (dev.rx_batch(0, bufs, 32) != 0) {
            }
            dev.tx_batch(0, bufs);
            rig.nic->step(1000);
        }
    }
    const DeviceStats s = dev.read_stats();
    CHECK(s.rx_packets == 1000);
    CHECK(s.rx_bytes == 100000);
    CHECK(s.tx_packets == 1000);
    CHECK(s.tx_bytes == 100000);
    CHECK(s.rx_dropped == 0);
    CHECK(dev.read_stats() == DeviceStats{});

    REQUIRE(rig.nic->inject(test::pattern_frame(100, 0)));
    rig.nic->step(10);
    dev.reset_stats();
    CHECK(dev.read_stats() == DeviceStats{});
}

TEST_CASE("link speed") {
    SUBCASE("10G") {
        test::Rig rig;
        CHECK(rig.init().get_link_speed() == 10000);
    }
    SUBCASE("1G") {
        ModelConfig config;
        config.link_speed_mbit = 1000;
        test::Rig rig(config);
        CHECK(rig.init().get_link_speed() == 1000);
    }
    SUBCASE("down") {
        test::Rig rig;
        auto& dev = rig.init();
        rig.nic->set_link_up(false);
        CHECK(dev.get_link_speed() == 0);
    }
    CHECK(link_speed_mbit(regs::LINKS_SPEED_10G) == 0);
    CHECK(link_speed_mbit(regs::LINKS_UP | regs::LINKS_SPEED_100M) == 100);
    CHECK(link_speed_mbit(regs::LINKS_UP) == 0);
}

TEST_CASE("without promiscuous mode only the station address passes") {
    test::Rig rig;
    DriverConfig config;
    config.promiscuous = false;
    auto& dev = rig.init(config);
    auto own = test::pattern_frame(60, 1);
    const auto mac = rig.nic->mac();
    std::copy(mac.begin(), mac.end(), own.begin());
    auto other = test::pattern_frame(60, 2);
    other[5] ^= 0x55;
    std::vector<std::uint8_t> broadcast = test::pattern_frame(60, 3);
    std::fill(broadcast.begin(), broadcast.begin() + 6, std::uint8_t{0xFF});
    REQUIRE(rig.nic->inject(other));
    REQUIRE(rig.nic->inject(own));
    REQUIRE(rig.nic->inject(broadcast));
    rig.nic->step(10);
    std::vector<PacketBuffer> bufs;
    REQUIRE(dev.rx_batch(0, bufs, 32) == 2);
    CHECK(bufs[0].at(0) == mac[0]);
    CHECK(bufs[1].at(0) == 0xFF);
    CHECK(rig.nic->counters().rx_filtered == 1);

    dev.set_promisc(true);
    REQUIRE(rig.nic->inject(other));
    rig.nic->step(10);
    CHECK(dev.rx_batch(0, bufs, 32) == 1);
}

TEST_CASE("property: at most one tail write per call, none without progress") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        test::Rig rig;
        DriverConfig config;
        config.ring_size = 64;
        auto& dev = rig.init(config);
        std::vector<PacketBuffer> held;
        for (int op = 0; op < 300; ++op) {
            const auto rdt = rig.nic->writes_of(regs::RDT(0));
            const auto tdt = rig.nic->writes_of(regs::TDT(0));
            const auto accesses = register_accesses(*rig.nic);
            switch (rng() % 4) {
            case 0:
                for (std::uint64_t i = rng() % 20; i > 0; --i) {
                    rig.nic->inject(test::pattern_frame(60, static_cast<std::uint32_t>(i)));
                }
                break;
            case 1: rig.nic->step(1 + rng() % 40); break;
            case 2: {
                const std::size_t n = dev.rx_batch(0, held, rng() % 40);
                REQUIRE(rig.nic->writes_of(regs::RDT(0)) - rdt == (n > 0 ? 1u : 0u));
                REQUIRE(rig.nic->writes_of(regs::TDT(0)) == tdt);
                if (n == 0) {
                    REQUIRE(register_accesses(*rig.nic) == accesses);
                }
                break;
            }
            default: {
                const std::size_t n = dev.tx_batch(0, held);
                REQUIRE(rig.nic->writes_of(regs::TDT(0)) - tdt == (n > 0 ? 1u : 0u));
                REQUIRE(rig.nic->writes_of(regs::RDT(0)) == rdt);
                if (n == 0) {
                    REQUIRE(register_accesses(*rig.nic) == accesses);
                }
                break;
            }
            }
            while (held.size() > 100) {
                held.pop_back();
            }
        }
    }
}

}
