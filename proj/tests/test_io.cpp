#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "gptop/io.hpp"

using namespace gptop;
using Eigen::MatrixXd;

namespace {

const char* kInverterConfig = R"({
  "name": "tiny_inverter",
  "class": "mechanism",
  "domain": {"lengths": [2.0, 1.0]},
  "materials": {"phases": ["void", "m3"]},
  "bcs": [
    {"kind": "dirichlet_displacement", "name": "corner", "region": {"lo": [0, 0], "hi": [0, 0.25]}},
    {"kind": "point_load", "name": "fin", "at": [0, 0.5], "direction": [1, 0], "value": 0.1},
    {"kind": "point_spring", "name": "kin", "at": [0, 0.5], "direction": [1, 0], "stiffness": 0.1},
    {"kind": "point_spring", "name": "kout", "at": [2, 0.5], "direction": [1, 0], "stiffness": 0.001}
  ],
  "output": {"at": [2, 0.5], "direction": [-1, 0]},
  "constraints": {"psi_m": 0.3},
  "grids": {"coarse": [9, 5], "fine": [9, 5], "n_g": 1},
  "net": {"n_rep": 2, "n_f": 8, "res": 6},
  "train": {"n_tol": 4, "seed": 3, "checkpoint_every": 0}
})";

std::string temp_path(const char* name) {
  return std::string("/tmp/gptop_io_test_") + name;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing is strict and round-trips") {
  auto spec = io::parse_spec(kInverterConfig);
  CHECK(spec.name == "tiny_inverter");
  CHECK(spec.cls == ProblemClass::Mechanism);
  CHECK(spec.domain.dim == 2);
  CHECK(spec.mats.n_phases() == 2);
  CHECK(spec.bcs.size() == 4);
  CHECK(spec.bcs[2].stiffness == 0.1);
  CHECK(spec.output.direction.x() == -1.0);
  CHECK(spec.psi_m == 0.3);
  CHECK(spec.train.seed == 3);

  // Serialization fixpoint: pretty form parses back to an identical dump.
  const std::string once = io::serialize_spec(spec);
  const std::string twice = io::serialize_spec(io::parse_spec(once));
  CHECK(once == twice);
}

TEST_CASE("config errors carry the offending path") {
  auto expect_error = [](const std::string& text, const std::string& frag) {
    try {
      io::parse_spec(text);
      FAIL("expected a parse error mentioning ", frag);
    } catch (const Error& e) {
      CHECK(e.code() == "config.parse");
      CHECK(std::string(e.what()).find(frag) != std::string::npos);
    }
  };
  expect_error(R"({"name": "x"})", "$.class");
  expect_error(
      R"({"name": "x", "class": "compliance", "domain": {"lengths": [1, 1]},
          "materials": {"phases": ["void", "m3"]}, "bcs": [],
          "grids": {"coarse": [3, 3], "fine": [3, 3], "n_g": 1},
          "typo_key": 1})",
      "$.typo_key");
  expect_error(
      R"({"name": "x", "class": "compliance", "domain": {"lengths": [1, 1]},
          "materials": {"phases": ["void", "m3"]},
          "bcs": [{"kind": "point_load", "name": "f", "at": [0, 0],
                   "direction": [0, -1]}],
          "grids": {"coarse": [3, 3], "fine": [3, 3], "n_g": 1}})",
      "$.bcs[0].value");
  expect_error(
      R"({"name": "x", "class": "compliance", "domain": {"lengths": [1, 1]},
          "materials": {"phases": ["void", "m3"]}, "bcs": [],
          "grids": {"coarse": [3, 3], "fine": [3, 3], "n_g": 1},
          "train": {"lr": "fast"}})",
      "$.train.lr");
  expect_error("not json at all", "invalid JSON");
}

TEST_CASE("history serialization is stable and complete") {
  trainer::EpochRecord r;
  r.epoch = 7;
  r.grid = 2;
  r.lr = 1e-3;
  r.penal = 1.5;
  r.psi_m = 0.45;
  r.loss.total = 12.5;
  r.loss.sens = -0.25;
  r.loss.mech = 1.0 / 3.0;
  r.energy.mass = 2e4;
  r.gray_total = 0.125;
  r.gray_phase = Eigen::VectorXd::Zero(2);
  r.gray_phase << 0.25, 1.0 / 7.0;

  const std::string header = io::history_header(2);
  CHECK(header.find("# schema gptop-history-v1") == 0);
  CHECK(header.find("gray_1") != std::string::npos);
  const std::string row = io::history_row(r, 2);
  CHECK(row.find("7,2,0.001") == 0);
  // Full-precision doubles survive a text round trip.
  CHECK(row.find("0.33333333333333331") != std::string::npos);
  CHECK(row.find("0.14285714285714285") != std::string::npos);

  const std::string path = temp_path("hist.csv");
  io::write_history_csv(path, {r, r}, 2);
  const std::string body = slurp(path);
  CHECK(body == header + row + row);

  // The streaming writer produces byte-identical output.
  const std::string path2 = temp_path("hist_stream.csv");
  {
    io::HistoryWriter w(path2, 2);
    w.append(r);
    w.append(r);
  }
  CHECK(slurp(path2) == body);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("design tables round-trip through disk") {
  grid::Domain d;
  d.dim = 2;
  d.lengths = {2.0, 1.0, 0.0};
  auto g = grid::build_grid(d, {5, 3, 1});
  MatrixXd rho(2, g.n_elems());
  for (int e = 0; e < g.n_elems(); ++e) {
    rho(0, e) = double(e) / g.n_elems();
    rho(1, e) = 1.0 - rho(0, e);
  }
  const std::string path = temp_path("design.csv");
  io::write_design_csv(path, g, rho);
  const MatrixXd back = io::load_design_csv(path);
  REQUIRE(back.rows() == 2);
  REQUIRE(back.cols() == g.n_elems());
  CHECK((back - rho).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());
}

TEST_CASE("rasters cover the lattice with mask-aware pixels") {
  grid::Domain d;
  d.dim = 2;
  d.lengths = {2.0, 1.0, 0.0};
  d.cutouts.push_back({{1.0, 0.5, 0.0}, {2.0, 1.0, 0.0}});
  auto g = grid::build_grid(d, {5, 3, 1});
  const int ne = g.n_elems();
  REQUIRE(ne == 6);  // 8 lattice cells minus 2 masked
  MatrixXd rho = MatrixXd::Zero(2, ne);
  rho.row(1).setConstant(1.0);

  const std::string pgm = temp_path("phase.pgm");
  io::write_phase_pgm(pgm, g, rho.row(1));
  {
    std::ifstream in(pgm);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    CHECK(magic == "P2");
    CHECK(w == 4);
    CHECK(h == 2);
    CHECK(maxv == 255);
    std::vector<int> px;
    int v;
    while (in >> v) px.push_back(v);
    REQUIRE(int(px.size()) == w * h);
    // Top row: two active cells then the masked cutout.
    CHECK(px[0] == 255);
    CHECK(px[1] == 255);
    CHECK(px[2] == 0);
    CHECK(px[3] == 0);
    CHECK(px[4] == 255);  // bottom row fully active
  }
  const std::string ppm = temp_path("phases.ppm");
  io::write_phase_ppm(ppm, g, rho, {"void", "m3"});
  {
    std::ifstream in(ppm);
    std::string magic;
    in >> magic;
    CHECK(magic == "P3");
  }
  std::remove(pgm.c_str());
  std::remove(ppm.c_str());
}

TEST_CASE("vtk export names phases and marks cutouts") {
  grid::Domain d;
  d.dim = 2;
  d.lengths = {1.0, 1.0, 0.0};
  d.cutouts.push_back({{0.5, 0.5, 0.0}, {1.0, 1.0, 0.0}});
  auto g = grid::build_grid(d, {3, 3, 1});
  MatrixXd rho = MatrixXd::Constant(2, g.n_elems(), 0.5);
  const std::string path = temp_path("design.vtk");
  io::write_vtk(path, g, rho, {"void", "m3"});
  const std::string body = slurp(path);
  CHECK(body.find("DATASET RECTILINEAR_GRID") != std::string::npos);
  CHECK(body.find("DIMENSIONS 3 3 1") != std::string::npos);
  CHECK(body.find("CELL_DATA 4") != std::string::npos);
  CHECK(body.find("SCALARS rho_m3 double 1") != std::string::npos);
  CHECK(body.find("-1") != std::string::npos);  // masked cell marker
  std::remove(path.c_str());
}

TEST_CASE("checkpoints restore parameters bit-exactly") {
  auto spec = io::parse_spec(kInverterConfig);
  auto a = problem::assemble(spec);
  auto b = problem::assemble(spec);
  // Perturb b so the restore provably comes from the file.
  for (auto& p : b.u_net->params()) p.array() += 0.5;
  for (auto& p : b.rho_net->params()) p.array() -= 0.25;

  const std::string path = temp_path("ck.bin");
  io::save_checkpoint(path, a);
  io::load_checkpoint(path, b);
  const auto slots_a = {a.u_net.get(), a.rho_net.get(), a.v_net.get()};
  const auto slots_b = {b.u_net.get(), b.rho_net.get(), b.v_net.get()};
  auto ita = slots_a.begin();
  auto itb = slots_b.begin();
  for (; ita != slots_a.end(); ++ita, ++itb) {
    REQUIRE(((*ita) != nullptr) == ((*itb) != nullptr));
    for (size_t i = 0; i < (*ita)->params().size(); ++i)
      CHECK((*ita)->params()[i] == (*itb)->params()[i]);
  }

  // A truncated file is rejected, not silently accepted.
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "GPTOPCK1\x01";
  }
  CHECK_THROWS_AS(io::load_checkpoint(path, b), Error);
  std::remove(path.c_str());
}

TEST_CASE("run metadata embeds the full configuration") {
  auto spec = io::parse_spec(kInverterConfig);
  auto a = problem::assemble(spec);
  const std::string path = temp_path("run.json");
  io::write_run_json(path, a, 0.5, 0.0);
  const std::string body = slurp(path);
  CHECK(body.find("\"schema\": \"gptop-run-v1\"") != std::string::npos);
  CHECK(body.find("\"alpha_u\": 10.0") != std::string::npos);
  CHECK(body.find("\"conditioning_cap\": 600") != std::string::npos);
  CHECK(body.find("\"tiny_inverter\"") != std::string::npos);
  // Metadata is not itself a valid config; strict parsing rejects it.
  CHECK_THROWS_AS(io::parse_spec(body), Error);
  std::remove(path.c_str());
}
