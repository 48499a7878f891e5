#!/usr/bin/env python3
"""Exit codes and outputs of the ixy command line tool."""
import csv
import os
import pathlib
import re
import subprocess
import sys
import tempfile
import unittest

CLI = None


def run(*args, env=None):
    merged = dict(os.environ)
    merged.update(env or {})
    return subprocess.run([CLI, *args], capture_output=True, text=True, env=merged, timeout=300)


class ExitCodes(unittest.TestCase):
    def test_usage_errors_exit_2(self):
        self.assertEqual(run().returncode, 2)
        self.assertEqual(run("nope").returncode, 2)
        self.assertEqual(run("dump").returncode, 2)
        self.assertEqual(run("dump", "--dev", "bogus").returncode, 2)
        self.assertEqual(run("gen", "--dev", "model:0", "--count", "10", "--size", "59").returncode, 2)
        self.assertEqual(run("gen", "--dev", "model:0").returncode, 2)
        self.assertEqual(run("fwd", "--dev-a", "model:0", "--dev-b", "model:1", "--batch", "0").returncode, 2)

    def test_missing_hardware_is_a_runtime_failure(self):
        r = run("dump", "--dev", "0000:7f:1f.7")
        self.assertEqual(r.returncode, 1)
        self.assertIn("error:", r.stderr)


class Commands(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.dir.cleanup()

    def path(self, name):
        return os.path.join(self.dir.name, name)

    def test_dump(self):
        r = run("dump", "--dev", "model:0")
        self.assertEqual(r.returncode, 0, r.stderr)
        self.assertIn("link: up, 10000 Mbit/s", r.stdout)
        self.assertIn("mac: 02:00:00:00:00:00", r.stdout)
        self.assertRegex(r.stdout, r"LINKS\s+0x042a4 = 0x70000000")

    def test_gen_writes_pcap(self):
        pcap = self.path("gen.pcap")
        r = run("gen", "--dev", "model:0", "--count", "100", "--size", "64", "--pcap", pcap)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(pcap, "rb") as f:
            data = f.read()
        self.assertEqual(data[:4], bytes([0x4D, 0x3C, 0xB2, 0xA1]))
        self.assertEqual(len(data), 24 + 100 * (16 + 64))

    def test_fwd_prints_stats(self):
        r = run("fwd", "--dev-a", "model:0", "--dev-b", "model:1", "--secs", "0.5", "--stats-interval", "0.25",
                "--inject", "1000")
        self.assertEqual(r.returncode, 0, r.stderr)
        stats = [l for l in r.stdout.splitlines() if l.startswith("[")]
        self.assertEqual(len(stats), 4)
        line = re.compile(r"\[model:[01]\] RX: \d+\.\d\d Mpps, \d+\.\d\d Mbit/s \| TX: \d+\.\d\d Mpps, \d+\.\d\d Mbit/s")
        for l in stats:
            self.assertRegex(l, line)

    def test_bench_sweep_csv(self):
        out = self.path("sweep.csv")
        r = run("bench", "sweep", "--sizes", "1,8,32", "--secs", "0.001", "--out", out)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(out, newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual([int(r["batch"]) for r in rows], [1, 8, 32])
        for row in rows:
            self.assertEqual(row["unit"], "ns")
            self.assertLessEqual(float(row["p50"]), float(row["p99"]))
            self.assertLessEqual(float(row["p99"]), float(row["max"]))

    def test_bench_sweep_is_seeded(self):
        outs = [self.path(f"s{i}.csv") for i in range(2)]
        for out in outs:
            r = run("bench", "sweep", "--sizes", "4", "--secs", "0.001", "--out", out, env={"IXY_SEED": "5"})
            self.assertEqual(r.returncode, 0, r.stderr)
        data = [pathlib.Path(o).read_bytes() for o in outs]
        self.assertEqual(data[0], data[1])

    def test_bench_latency_and_histogram(self):
        out, hist = self.path("lat.csv"), self.path("hist.csv")
        r = run("bench", "latency", "--pps", "1000000", "--secs", "0.001", "--out", out, "--hist", hist)
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(hist) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], "latency_ns,count")
        self.assertEqual(sum(int(l.split(",")[1]) for l in lines[1:]), 1000)

    def test_bench_overflow_csv(self):
        out = self.path("overflow.csv")
        r = run("bench", "overflow", "--out", out, "--secs", "0.001", "--repeats", "1")
        self.assertEqual(r.returncode, 0, r.stderr)
        with open(out, newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(len(rows), 1)
        self.assertEqual(rows[0]["batch"], "8")
        self.assertGreaterEqual(float(rows[0]["delta"]), 0.0)

    def test_bad_sizes(self):
        r = run("bench", "sweep", "--sizes", "1,300", "--out", self.path("x.csv"))
        self.assertEqual(r.returncode, 2)


if __name__ == "__main__":
    CLI = sys.argv.pop(1)
    unittest.main()
