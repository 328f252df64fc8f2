// SPDX-License-Identifier: Apache-2.0
#include "support.hpp"

#include "gridwatch/error.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace gridwatch;
using test::ToyLine;

namespace {

Mat3c diag_series(Complex y) { return Mat3c::Identity() * y; }

std::vector<BusId> random_subset(const std::vector<BusId>& ids, std::size_t k, std::mt19937_64& rng) {
  auto v = ids;
  std::shuffle(v.begin(), v.end(), rng);
  v.resize(k);
  return v;
}

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("bundled ieee34 has 34 buses") {
    const auto& f = test::ieee34();
    CHECK(f.bus_count() == 34);
    CHECK(f.slack() == 1);
  }

  TEST_CASE("bundled ieee123 reduces to 70 buses") {
    const auto f = model::load_feeder(test::data_path("feeders/ieee123.feeder"));
    const auto r = model::reduce_laterals(f);
    CHECK(r.feeder.bus_count() == 70);
    for (const auto& l : r.feeder.lines()) CHECK(l.phases.full());
  }

  TEST_CASE("minimal two-bus feeder") {
    const auto f = test::toy_feeder(2, {{1, 2, "abc", diag_series({1.0, -2.0})}});
    CHECK(f.bus_count() == 2);
    CHECK(f.lines().size() == 1);
  }

  TEST_CASE("line referencing an unknown bus names the line") {
    auto doc = test::toy_doc(2, {{1, 2, "abc", diag_series({1.0, -2.0})}});
    doc["lines"][0]["id"] = "bad-line";
    doc["lines"][0]["to"] = 99;
    try {
      model::parse_feeder(doc);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad-line") != std::string::npos);
    }
  }

  TEST_CASE("disconnected feeder is rejected") {
    CHECK_THROWS_AS(test::toy_feeder(3, {{1, 2, "abc", diag_series({1.0, -2.0})}}), DataError);
  }

  TEST_CASE("phase mask parsing") {
    CHECK(model::PhaseMask::parse("ac").str() == "ac");
    CHECK(model::PhaseMask::parse("abc").full());
    CHECK_THROWS_AS(model::PhaseMask::parse("ad"), DataError);
    CHECK_THROWS_AS(model::PhaseMask::parse(""), DataError);
  }

  TEST_CASE("two-bus stamp without shunt") {
    const Complex y(2.0, -5.0);
    const auto f = test::toy_feeder(2, {{1, 2, "abc", diag_series(y)}});
    const auto s = model::build_system(f);
    for (int p = 0; p < 3; ++p) {
      CHECK(std::abs(s.Y(p, p) - y) < 1e-12);
      CHECK(std::abs(s.Y(p, 3 + p) + y) < 1e-12);
      CHECK(std::abs(s.Y(3 + p, p) + y) < 1e-12);
      CHECK(std::abs(s.Y(3 + p, 3 + p) - y) < 1e-12);
    }
  }

  TEST_CASE("two-bus stamp with shunt adds half the charging at each end") {
    const Complex y(2.0, -5.0), ysh(0.0, 1e-3);
    const auto f = test::toy_feeder(2, {{1, 2, "abc", diag_series(y), diag_series(ysh)}});
    const auto s = model::build_system(f);
    CHECK(std::abs(s.Y(0, 0) - (y + ysh / 2.0)) < 1e-12);
    CHECK(std::abs(s.Y(4, 4) - (y + ysh / 2.0)) < 1e-12);
    CHECK(std::abs(s.Y(0, 3) + y) < 1e-12);
  }

  TEST_CASE("per-unit and SI admittances differ by the impedance base") {
    const auto& s = test::ieee34_system();
    const double zb = test::ieee34().impedance_base(test::ieee34().slack());
    CHECK((s.Y_pu / zb - s.Y).norm() <= 1e-12 * s.Y.norm());
  }

  TEST_CASE("H is [I | -Y]") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 5; ++t) {
      const auto s = model::build_system(test::random_radial_feeder(8, rng));
      const auto n = s.Y.rows();
      CHECK(s.H.rows() == n);
      CHECK(s.H.cols() == 2 * n);
      CHECK(s.H.leftCols(n) == Eigen::MatrixXcd::Identity(n, n));
      CHECK(s.H.rightCols(n) == Eigen::MatrixXcd(-s.Y));
    }
  }

  TEST_CASE("Kirchhoff null vector") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int t = 0; t < 20; ++t) {
      const auto s = model::build_system(test::random_radial_feeder(12, rng));
      const auto n = s.Y.rows();
      Eigen::VectorXcd V(n);
      for (Eigen::Index i = 0; i < n; ++i) V(i) = Complex(g(rng), g(rng)) * 1e3;
      Eigen::VectorXcd d(2 * n);
      d << s.Y * V, V;
      CHECK((s.H * d).norm() <= 1e-12 * d.norm());
    }
  }

  TEST_CASE("Y is complex-symmetric with zero rows and columns on absent phases") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 20; ++t) {
      const auto f = test::random_radial_feeder(10, rng);
      const auto s = model::build_system(f);
      CHECK(s.Y == s.Y.transpose());
      for (const auto& b : f.buses()) {
        const auto mask = f.bus_phases(b.id);
        for (int p = 0; p < 3; ++p) {
          if (mask.has(p)) continue;
          const auto r = s.current_col(b.id, p);
          CHECK(s.Y.row(r).isZero(0.0));
          CHECK(s.Y.col(r).isZero(0.0));
          CHECK_FALSE(s.live_rows[static_cast<std::size_t>(r)]);
        }
      }
    }
  }

  TEST_CASE("block row sums equal the total shunt") {
    std::mt19937_64 rng(6);
    const auto f = test::random_radial_feeder(9, rng, true);
    const auto s = model::build_system(f);
    // Y applied to a flat unit voltage leaves only the shunt currents.
    Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(s.Y.cols());
    const Eigen::VectorXcd i = s.Y * ones;
    Eigen::VectorXcd shunt = Eigen::VectorXcd::Zero(s.Y.rows());
    for (const auto& l : f.lines()) {
      for (const BusId b : {l.from, l.to}) {
        const auto r = 3 * s.index_of(b);
        shunt.segment(r, 3) += (l.shunt / f.impedance_base(b)) * Vec3c::Ones() / 2.0;
      }
    }
    CHECK((i - shunt).norm() <= 1e-9 * shunt.norm());
  }

  TEST_CASE("placement invariants") {
    CHECK_THROWS_AS(model::Placement({}), ValidationError);
    CHECK_THROWS_AS(model::Placement({3, 3}), ValidationError);
    const model::Placement p({19, 7, 31});
    CHECK(p.buses() == std::vector<BusId>{7, 19, 31});
    CHECK_THROWS_AS(model::Placement({7, 99}).check_against(test::ieee34_system()), ValidationError);
  }

  TEST_CASE("partition of ieee34 with three sensors") {
    const auto part = model::partition(test::ieee34_system(), model::Placement({7, 19, 31}));
    CHECK(part.H_a.rows() == 102);
    CHECK(part.H_a.cols() == 18);
    CHECK(part.H_u.cols() == 186);
    // Per sensor: three current phases, then three voltage phases.
    CHECK(part.a_cols[0].bus == 7);
    CHECK(part.a_cols[0].quantity == model::Quantity::Current);
    CHECK(part.a_cols[3].quantity == model::Quantity::Voltage);
    CHECK(part.a_cols[6].bus == 19);
  }

  TEST_CASE("full placement leaves H_u empty") {
    std::mt19937_64 rng(7);
    const auto f = test::random_radial_feeder(5, rng);
    const auto s = model::build_system(f);
    const auto part = model::partition(s, model::Placement(s.bus_ids));
    CHECK(part.H_u.cols() == 0);
    CHECK(part.H_a.cols() == s.H.cols());
    CHECK(model::reassemble(part) == s.H);
  }

  TEST_CASE("partition columns are disjoint, exhaustive and reassemble H exactly") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
      const int n = std::uniform_int_distribution<int>(2, 14)(rng);
      const auto s = model::build_system(test::random_radial_feeder(n, rng));
      const auto k = std::uniform_int_distribution<std::size_t>(1, s.bus_ids.size())(rng);
      const auto part = model::partition(s, model::Placement(random_subset(s.bus_ids, k, rng)));
      std::set<Eigen::Index> cols;
      for (const auto& c : part.a_cols) cols.insert(c.h_col);
      for (const auto& c : part.u_cols) cols.insert(c.h_col);
      CHECK(cols.size() == part.a_cols.size() + part.u_cols.size());
      CHECK(static_cast<Eigen::Index>(cols.size()) == s.H.cols());
      CHECK(model::reassemble(part) == s.H);
    }
  }

  TEST_CASE("reduce_laterals leaves a three-phase feeder unchanged") {
    std::mt19937_64 rng(9);
    const auto f = test::random_radial_feeder(7, rng, true);
    const auto r = model::reduce_laterals(f);
    CHECK(r.feeder.bus_count() == f.bus_count());
    CHECK(r.feeder.lines().size() == f.lines().size());
    CHECK(r.provenance.empty());
    CHECK(model::build_system(r.feeder).Y == model::build_system(f).Y);
  }

  TEST_CASE("reduce_laterals on a star with two single-phase spurs") {
    const auto y = diag_series({1.0, -2.0});
    const auto f = test::toy_feeder(4, {{1, 2, "abc", y}, {2, 3, "a", y}, {2, 4, "b", y}});
    const auto r = model::reduce_laterals(f);
    CHECK(r.feeder.bus_count() == 2);
    CHECK(r.feeder.lines().size() == 1);
    REQUIRE(r.provenance.count(2) == 1);
    auto subtrees = r.provenance.at(2);
    std::sort(subtrees.begin(), subtrees.end());
    CHECK(subtrees == std::vector<std::vector<BusId>>{{3}, {4}});
  }
}
