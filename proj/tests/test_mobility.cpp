#include <cmath>
#include <sstream>

#include "doctest.h"
#include "locfuse/errors.hpp"
#include "locfuse/mobility.hpp"

using namespace locfuse;

TEST_SUITE("mobility") {
  TEST_CASE("default trajectory length") {
    WaypointModelParams p;
    CHECK(p.epoch_count() == 5000);
    const Trajectory t = generate_trajectory(p, Scene{}, 1);
    CHECK(t.epochs() == 5000);
    CHECK(t.velocities().size() == 5000);
    CHECK(t.accelerations().size() == 5000);
  }

  TEST_CASE("epoch count is floor(duration / dt)") {
    WaypointModelParams p;
    p.duration_s = 1.05;
    CHECK(p.epoch_count() == 10);
    p.duration_s = 0.3;
    CHECK(p.epoch_count() == 3);
    p.duration_s = 0.05;
    CHECK_THROWS_AS(p.validate(), DomainError);
  }

  TEST_CASE("parameter validation") {
    WaypointModelParams p;
    p.speed_min = 1.5;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.epoch_dt_s = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.speed_min = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
  }

  TEST_CASE("speed bound and kinematics on leg interiors") {
    WaypointModelParams p;
    p.duration_s = 200.0;
    const Scene s;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const Trajectory t = generate_trajectory(p, s, seed);
      const double dt = t.epoch_dt();
      std::size_t interior = 0;
      for (std::size_t k = 0; k + 1 < t.epochs(); ++k) {
        if (!t.leg_interior(k)) continue;
        ++interior;
        const Point3 step = t.positions()[k + 1] - t.positions()[k];
        const double speed = step.norm() / dt;
        CHECK(speed >= 1.0 - 1e-9);
        CHECK(speed <= 1.2 + 1e-9);
        CHECK((t.velocities()[k] - step / dt).norm() < 1e-9);
        CHECK(t.accelerations()[k].norm() == 0.0);
      }
      CHECK(interior > t.epochs() / 2);
      for (const Point3& q : t.positions()) {
        CHECK(s.bounds.contains(q));
        CHECK(q.z() >= p.z_band.lo - 1e-9);
        CHECK(q.z() <= p.z_band.hi + 1e-9);
      }
    }
  }

  TEST_CASE("turns carry a one-epoch acceleration") {
    WaypointModelParams p;
    p.duration_s = 300.0;
    const Trajectory t = generate_trajectory(p, Scene{}, 3);
    std::size_t turns = 0;
    for (std::size_t k = 0; k + 1 < t.epochs(); ++k) {
      if (t.leg_interior(k)) continue;
      ++turns;
      const Point3 expected = (t.velocities()[k + 1] - t.velocities()[k]) / t.epoch_dt();
      CHECK((t.accelerations()[k] - expected).norm() < 1e-9);
    }
    CHECK(turns > 0);
  }

  TEST_CASE("determinism and seed sensitivity") {
    WaypointModelParams p;
    p.duration_s = 50.0;
    const Trajectory a = generate_trajectory(p, Scene{}, 42);
    const Trajectory b = generate_trajectory(p, Scene{}, 42);
    const Trajectory c = generate_trajectory(p, Scene{}, 43);
    CHECK(a.positions() == b.positions());
    CHECK(a.velocities() == b.velocities());
    CHECK(a.positions() != c.positions());
  }

  TEST_CASE("kinematic_sample") {
    WaypointModelParams p;
    p.duration_s = 10.0;
    const Trajectory t = generate_trajectory(p, Scene{}, 8);
    const Kinematics k0 = kinematic_sample(t, 0);
    CHECK(k0.position == t.positions()[0]);
    CHECK(k0.velocity == t.velocities()[0]);
    CHECK_THROWS_AS(kinematic_sample(t, t.epochs()), IndexError);
  }

  TEST_CASE("waypoints avoid obstacles") {
    Scene s;
    s.obstacles.push_back({Point3(0, 0, 0), Point3(35, 25, 18)});
    WaypointModelParams p;
    p.duration_s = 100.0;
    const Trajectory t = generate_trajectory(p, s, 2);
    CHECK(s.is_free(t.positions()[0]));
    Scene full;
    full.obstacles.push_back({Point3(0, 0, 0), Point3(70, 25, 18)});
    CHECK_THROWS_AS(generate_trajectory(p, full, 2), PlacementError);
  }

  TEST_CASE("trajectory csv") {
    WaypointModelParams p;
    p.duration_s = 1.0;
    const Trajectory t = generate_trajectory(p, Scene{}, 1);
    std::ostringstream out;
    write_trajectory_csv(out, t);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,x,y,z,vx,vy,vz");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == t.epochs());
  }
}
