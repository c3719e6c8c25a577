/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The tvbf Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "test_support.hpp"
#include "tvbf/keyvalue.hpp"
#include "tvbf/postproc.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args, const fs::path& log = {}) {
  std::string cmd = std::string(TVBF_CLI) + " " + args;
  cmd += log.empty() ? " >/dev/null 2>&1" : " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path dir = tvbf::test::scratch("cli");
  fs::path rfd = dir / "cyst.rfd";
  fs::path weights = dir / "w.tvbf";
  Workspace() {
    REQUIRE(run("synth --phantom cyst --seed 5 --scatterer-count 800 --output " + rfd.string()) == 0);
    REQUIRE(run("init-weights --model-config " TVBF_SOURCE_DIR "/configs/tiny_vbf_small.cfg --seed 2 --output " +
                weights.string()) == 0);
  }
  std::string s(const fs::path& p) const { return p.string(); }
};

}  // namespace

TEST_CASE("synth and init-weights are deterministic") {
  Workspace w;
  const auto again = w.dir / "again.rfd";
  const auto other = w.dir / "other.rfd";
  REQUIRE(run("synth --phantom cyst --seed 5 --scatterer-count 800 --output " + w.s(again)) == 0);
  REQUIRE(run("synth --phantom cyst --seed 6 --scatterer-count 800 --output " + w.s(other)) == 0);
  CHECK(tvbf::test::read_bytes(w.rfd) == tvbf::test::read_bytes(again));
  CHECK(tvbf::test::read_bytes(w.rfd) != tvbf::test::read_bytes(other));

  const auto w2 = w.dir / "w2.tvbf";
  REQUIRE(run("init-weights --model-config " TVBF_SOURCE_DIR "/configs/tiny_vbf_small.cfg --seed 2 --output " +
              w.s(w2)) == 0);
  CHECK(tvbf::test::read_bytes(w.weights) == tvbf::test::read_bytes(w2));

  REQUIRE(run("synth --phantom point --scatterers '9.2,0;10,1.5,0.5' --output-dir " + w.s(w.dir)) == 0);
  CHECK(fs::exists(w.dir / "point.rfd"));
}

TEST_CASE("engines agree and accel-sim writes a cycle report") {
  Workspace w;
  const std::string common = "beamform --input " + w.s(w.rfd) + " --beamformer vbf --weights " +
                             w.s(w.weights) + " --scheme hybrid1 --image-format pgm";
  REQUIRE(run(common + " --engine reference --output-dir " + w.s(w.dir / "ref")) == 0);
  REQUIRE(run(common + " --engine accel-sim --output-dir " + w.s(w.dir / "sim")) == 0);
  const auto a = tvbf::test::read_bytes(w.dir / "ref" / "vbf-hybrid1.iqf");
  CHECK(!a.empty());
  CHECK(a == tvbf::test::read_bytes(w.dir / "sim" / "vbf-hybrid1.iqf"));
  CHECK(tvbf::test::read_bytes(w.dir / "ref" / "vbf-hybrid1.pgm") ==
        tvbf::test::read_bytes(w.dir / "sim" / "vbf-hybrid1.pgm"));
  CHECK_FALSE(fs::exists(w.dir / "ref" / "vbf-hybrid1.cycles.txt"));
  const auto cycles = slurp(w.dir / "sim" / "vbf-hybrid1.cycles.txt");
  CHECK(cycles.find("total.cycles = ") != std::string::npos);
  CHECK(cycles.find("lateral_lines = 64") != std::string::npos);
}

TEST_CASE("config files and flag overrides") {
  Workspace w;
  const auto cfg = w.dir / "run.cfg";
  std::ofstream(cfg) << "# test run\ninput = " << w.s(w.rfd) << "\nbeamformer = das\n"
                     << "dynamic_range = 50\nimage_format = pgm\n";
  REQUIRE(run("beamform --config " + w.s(cfg) + " --output-dir " + w.s(w.dir / "c")) == 0);
  CHECK(fs::exists(w.dir / "c" / "das-float.iqf"));
  CHECK(fs::exists(w.dir / "c" / "das-float.pgm"));
  REQUIRE(run("beamform --config " + w.s(cfg) + " --beamformer mvdr --image-format png --output-dir " +
              w.s(w.dir / "c")) == 0);
  CHECK(fs::exists(w.dir / "c" / "mvdr-float.png"));

  const auto log = w.dir / "metrics.log";
  REQUIRE(run("metrics --input " + w.s(w.dir / "c" / "das-float.iqf") + " --input " +
                  w.s(w.dir / "c" / "mvdr-float.iqf") + " --regions " TVBF_SOURCE_DIR
                  "/configs/cyst_regions.cfg --depths 9.56 --output-dir " + w.s(w.dir / "m"),
              log) == 0);
  const auto report = slurp(w.dir / "m" / "metrics.txt");
  CHECK(report == slurp(log));
  CHECK(report.find("image.1.cr_db = ") != std::string::npos);
  CHECK(report.find("image.0.depth.0.lateral_fwhm_mm = ") != std::string::npos);
}

TEST_CASE("compare and cycles reports") {
  Workspace w;
  const auto log = w.dir / "compare.log";
  REQUIRE(run("compare --input " + w.s(w.rfd) + " --beamformer vbf --weights " + w.s(w.weights) +
                  " --schemes float,q24,hybrid2 --regions " TVBF_SOURCE_DIR "/configs/cyst_regions.cfg",
              log) == 0);
  const auto text = slurp(log);
  CHECK(text.find("count = 3") != std::string::npos);
  CHECK(text.find("row.0.baseline = true") != std::string::npos);
  CHECK(text.find("row.2.delta_gcnr = ") != std::string::npos);

  const auto clog = w.dir / "cycles.log";
  REQUIRE(run("cycles --grid frame", clog) == 0);
  CHECK(slurp(clog).find("lateral_lines = 128") != std::string::npos);
}

TEST_CASE("report contents") {
  Workspace w;
  const std::string regions = " --regions " TVBF_SOURCE_DIR "/configs/cyst_regions.cfg";

  SUBCASE("metrics rows are deterministic and bounded") {
    REQUIRE(run("beamform --input " + w.s(w.rfd) + " --output-dir " + w.s(w.dir)) == 0);
    const auto iqf = w.s(w.dir / "das-float.iqf");
    const auto log = w.dir / "m.log";
    REQUIRE(run("metrics --input " + iqf + " --input " + iqf + regions, log) == 0);
    const auto kv = tvbf::KeyValues::parse(slurp(log));
    for (const auto* key : {"cr_db", "cnr", "gcnr"})
      CHECK(kv.get(std::string("image.0.") + key) == kv.get(std::string("image.1.") + key));
    CHECK(kv.get_double("image.0.gcnr") >= 0.0);
    CHECK(kv.get_double("image.0.gcnr") <= 1.0);
  }
  SUBCASE("MVDR is no wider than DAS on a point target") {
    const auto rfd = w.dir / "point.rfd";
    REQUIRE(run("synth --phantom point --grid psf --scatterers 9.5,0 --output " + w.s(rfd)) == 0);
    for (const auto* bf : {"das", "mvdr"})
      REQUIRE(run("beamform --grid psf --beamformer " + std::string(bf) + " --input " + w.s(rfd) +
                  " --output-dir " + w.s(w.dir)) == 0);
    const auto log = w.dir / "psf.log";
    REQUIRE(run("metrics --depths 9.5 --input " + w.s(w.dir / "das-float.iqf") + " --input " +
                    w.s(w.dir / "mvdr-float.iqf"),
                log) == 0);
    const auto kv = tvbf::KeyValues::parse(slurp(log));
    CHECK(kv.get_double("image.1.depth.0.lateral_fwhm_mm") <=
          kv.get_double("image.0.depth.0.lateral_fwhm_mm"));

    // the DAS image peaks at the scatterer pixel
    const auto iq = tvbf::load_iq(w.dir / "das-float.iqf");
    const auto env = tvbf::envelope(iq);
    const auto at = static_cast<std::size_t>(
        std::max_element(env.data().begin(), env.data().end()) - env.data().begin());
    const auto& g = iq.grid;
    CHECK(std::abs(g.axial_positions_m[at / g.cols()] - 0.0095) <=
          g.axial_positions_m[1] - g.axial_positions_m[0]);
    CHECK(std::abs(g.lateral_positions_m[at % g.cols()]) <=
          g.lateral_positions_m[1] - g.lateral_positions_m[0]);
  }
  SUBCASE("compare tables") {
    const auto log = w.dir / "c.log";
    REQUIRE(run("compare --input " + w.s(w.rfd) + " --beamformer vbf --weights " + w.s(w.weights) +
                    " --schemes float,float,q24,q16,hybrid1,hybrid2",
                log) == 0);
    const auto kv = tvbf::KeyValues::parse(slurp(log));
    CHECK(kv.get_double("row.1.max_abs_error") == 0.0);
    CHECK(kv.get_double("row.1.rms_error") == 0.0);
    CHECK(kv.get_double("row.2.max_abs_error") <= kv.get_double("row.3.max_abs_error"));
    CHECK(kv.get("row.4.name") == "vbf-hybrid1@reference");
    CHECK(kv.get("row.5.name") == "vbf-hybrid2@reference");

    const auto a = w.dir / "a.cfg";
    const auto b = w.dir / "b.cfg";
    std::ofstream(a) << "input = " << w.s(w.rfd) << "\ngrid = small\n";
    std::ofstream(b) << "input = " << w.s(w.rfd) << "\ngrid = psf\nbeamformer = mvdr\n";
    CHECK(run("compare " + w.s(a) + " " + w.s(b)) == 4);
  }
  SUBCASE("empty point phantom") {
    const auto rfd = w.dir / "empty.rfd";
    REQUIRE(run("synth --phantom point --scatterers none --output " + w.s(rfd)) == 0);
    for (float v : tvbf::load_rf(rfd).samples.data()) CHECK(v == 0.0f);
    CHECK(run("synth --phantom point --scatterers 9.5,x --output " + w.s(rfd)) == 4);
    CHECK(run("synth --phantom cyst --cyst 9,0 --output " + w.s(rfd)) == 4);
  }
}

TEST_CASE("exit codes") {
  Workspace w;
  CHECK(run("beamform --input " + w.s(w.rfd) + " --beamformer vbf") == 4);
  CHECK(run("beamform --input " + w.s(w.rfd) + " --scheme q16") == 4);
  CHECK(run("beamform --input " + w.s(w.rfd) + " --scheme q99 --beamformer vbf --weights " +
            w.s(w.weights)) == 4);
  CHECK(run("beamform --bogus") == 4);
  CHECK(run("beamform --input " + w.s(w.dir / "missing.rfd")) == 2);
  auto bytes = tvbf::test::read_bytes(w.rfd);
  bytes.resize(bytes.size() / 2);
  tvbf::test::write_bytes(w.dir / "cut.rfd", bytes);
  CHECK(run("beamform --input " + w.s(w.dir / "cut.rfd")) == 2);
  CHECK(run("metrics --input " + w.s(w.rfd)) == 2);
  CHECK(run("beamform --input " + w.s(w.rfd) + " --grid nowhere") == 4);
}
