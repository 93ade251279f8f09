#include <doctest.h>

#include "serial_oracle.hpp"
#include "tiersim/dram.hpp"
#include "tiersim/errors.hpp"
#include "tiersim/trace.hpp"

using namespace tiersim;

TEST_CASE("address mapping examples") {
  DramConfig c;
  c.banks_per_rank = 4;
  CHECK(map_address(0, c) == DramCoord{});
  const auto a = map_address(64, c);
  CHECK(a == DramCoord{0, 0, 0, 0, 0, 1});
  const auto b = map_address(0x2000, c);
  CHECK(b == DramCoord{0, 0, 1, 0, 0, 0});
  CHECK(b == testing::oracle_map(0x2000, c));
}

TEST_CASE("address mapping is a bijection on cache lines") {
  DramConfig c;
  c.channels = 2;
  c.ranks_per_channel = 2;
  c.banks_per_rank = 4;
  c.subarrays_per_bank = 16;
  AddressMapper m(c);
  XorShift64Star rng(42);
  for (int i = 0; i < 100'000; ++i) {
    const auto addr = rng.below(m.capacity());
    const auto coord = m.map(addr);
    REQUIRE(coord == testing::oracle_map(addr, c));
    REQUIRE(m.encode(coord) == (addr & ~std::uint64_t{63}));
    REQUIRE(m.flat_bank(coord) < c.total_banks());
  }
  CHECK(m.capacity() == c.capacity_bytes());
  CHECK_THROWS_AS(m.map(m.capacity()), InputError);
}

TEST_CASE("segment boundaries") {
  DramConfig c;
  c.mode = DramMode::Tldram;
  c.near_rows_per_subarray = 16;
  auto at = [&](std::uint32_t row) { return segment_of(DramCoord{0, 0, 0, 0, row, 0}, c); };
  CHECK(at(0) == Segment::Near);
  CHECK(at(15) == Segment::Near);
  CHECK(at(16) == Segment::Far);
  CHECK(at(c.rows_per_subarray - 1) == Segment::Far);
  c.mode = DramMode::Baseline;
  CHECK_THROWS_AS(at(0), InvariantFault);
}

TEST_CASE("activation latency per mode") {
  DramConfig c;
  const DramCoord far{0, 0, 0, 0, 100, 0};
  CHECK(activate_latency(far, c, nullptr) == ActivationTiming{11, 28});

  c.mode = DramMode::Crow;
  CopyRowTable copies(1, 2);
  CHECK(activate_latency(far, c, &copies) == ActivationTiming{11, 28});
  copies.install(0, 100, 0, false);
  // ceil(0.62 * 11) = 7, ceil(0.79 * 28) = 23.
  CHECK(activate_latency(far, c, &copies) == ActivationTiming{7, 23});

  c.mode = DramMode::Tldram;
  const DramCoord near{0, 0, 0, 0, 3, 0};
  CHECK(activate_latency(near, c, nullptr) == ActivationTiming{c.tRCD_near, c.tRAS_near});
  CHECK(activate_latency(far, c, nullptr) == ActivationTiming{c.tRCD_far, c.tRAS_far});
}

TEST_CASE("copy factors round up") {
  DramConfig c;
  c.crow_trcd_factor = 0.5;
  c.crow_tras_factor = 1.0;
  CHECK(activation_timing(RowSource::Copy, c) == ActivationTiming{6, 28});
  for (double f : {0.1, 0.25, 0.62, 0.79, 0.999}) {
    c.crow_trcd_factor = f;
    CHECK(activation_timing(RowSource::Copy, c).trcd == testing::oracle_scaled(c.tRCD_far, f));
  }
}

TEST_CASE("earliest legal issue cycles") {
  DramConfig c;
  BankState bank;
  CHECK(bank.earliest_issue(DramCommand::Activate, 5) == 5);
  bank.issue(DramCommand::Activate, 10, c, CommandArgs{0, 7, RowSource::Far, {11, 28}, 0});
  CHECK(bank.earliest_issue(DramCommand::Read, 12) == 21);
  CHECK(bank.earliest_issue(DramCommand::Precharge, 15) == 38);
  CHECK(bank.earliest_issue(DramCommand::Activate, 15) == kNever);
}

TEST_CASE("command effects on bank state") {
  DramConfig c;
  BankState bank;
  CHECK(bank.issue(DramCommand::Activate, 100, c, CommandArgs{0, 7, RowSource::Far, {11, 28}, 0}) == 111);
  CHECK(bank.busy_until() == 111);
  CHECK(bank.phase_at(105) == BankPhase::Activating);
  CHECK(bank.phase_at(111) == BankPhase::Active);
  REQUIRE(bank.open_row());
  CHECK(bank.open_row()->row == 7);
  CHECK(bank.issue(DramCommand::Read, 111, c, CommandArgs{0, 7}) == 126);
  CHECK_THROWS_AS(bank.issue(DramCommand::Read, 112, c, CommandArgs{0, 7}), InvariantFault);
  CHECK_THROWS_AS(bank.issue(DramCommand::Precharge, 120, c, {}), InvariantFault);
  bank.issue(DramCommand::Precharge, 128, c, {});
  CHECK_FALSE(bank.open_row());
  CHECK(bank.phase_at(139) == BankPhase::Idle);
  CHECK(bank.earliest_issue(DramCommand::Activate, 130) == 139);
  CHECK(bank.activation_count(0, 7) == 1);
  CHECK(bank.activation_count(0, 8) == 0);
}

TEST_CASE("column command to another row is rejected") {
  DramConfig c;
  BankState bank;
  bank.issue(DramCommand::Activate, 0, c, CommandArgs{0, 7, RowSource::Far, {11, 28}, 0});
  CHECK_THROWS_AS(bank.issue(DramCommand::Read, 11, c, CommandArgs{0, 8}), InvariantFault);
  CHECK_THROWS_AS(bank.issue(DramCommand::Activate, 50, c, CommandArgs{0, 8}), InvariantFault);
}

TEST_CASE("refresh and migrate occupy the bank") {
  DramConfig c;
  BankState bank;
  CHECK(bank.issue(DramCommand::Refresh, 0, c, {}) == c.tRFC);
  CHECK(bank.phase_at(1) == BankPhase::Refreshing);
  CHECK(bank.earliest_issue(DramCommand::Activate, 1) == c.tRFC);
  CHECK(bank.issue(DramCommand::Migrate, 300, c, CommandArgs{0, 0, RowSource::Far, {}, 80}) == 380);
  CHECK(bank.phase_at(379) == BankPhase::Migrating);
}

TEST_CASE("refresh skip rule") {
  DramConfig c;
  const auto w = c.refresh_window;
  RowRefreshState ordinary{0, false, std::nullopt};
  CHECK(refresh_due(ordinary, w, c));
  CHECK_FALSE(refresh_due(ordinary, w - 1, c));

  RowRefreshState copy{0, true, w - 1};
  CHECK_FALSE(refresh_due(copy, w, c));
  CHECK(refresh_window_elapsed(copy, w, c));

  RowRefreshState stale{0, true, 0};
  CHECK(refresh_due(stale, 2 * w, c));
}

TEST_CASE("refresh occupancy scales with rows performed") {
  DramConfig c;
  c.tREFI = 1000;
  c.refresh_window = 100'000;
  c.tRFC = 200;
  // 4352 rows * 1000 / 100000 = 43.52, rounded up to 44.
  CHECK(nominal_rows_per_refresh(4352, c) == 44);
  CHECK(refresh_occupancy(44, 4352, c) == 200);
  CHECK(refresh_occupancy(11, 4352, c) == 50);
  CHECK(refresh_occupancy(1, 4352, c) == 5);
  CHECK(nominal_rows_per_refresh(1, c) == 1);
}

TEST_CASE("copy rows replace the least recently used entry") {
  CopyRowTable t(2, 2);
  CHECK_FALSE(t.install(1, 10, 0, false));
  CHECK_FALSE(t.install(1, 11, 1, false));
  REQUIRE(t.touch(1, 10, 2));
  const auto displaced = t.install(1, 12, 3, true);
  REQUIRE(displaced);
  CHECK(displaced->row == 11);
  CHECK(t.contains(1, 10));
  CHECK(t.contains(1, 12));
  CHECK_FALSE(t.contains(0, 10));
  CHECK(t.occupancy(1) == 2);
  CHECK_THROWS_AS(t.install(1, 12, 4, false), InvariantFault);
}

TEST_CASE("config validation") {
  DramConfig c;
  CHECK_NOTHROW(c.validate());
  c.mode = DramMode::Tldram;
  c.tRCD_near = 20;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = DramConfig{};
  c.banks_per_rank = 6;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = DramConfig{};
  c.near_rows_per_subarray = c.rows_per_subarray;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = DramConfig{};
  c.crow_trcd_factor = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = DramConfig{};
  c.tRP = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = DramConfig{};
  c.mode = DramMode::Crow;
  c.copy_rows_per_subarray = 0;
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("reserved rows depend on mode") {
  DramConfig c;
  CHECK(c.reserved_rows_per_subarray() == 0);
  c.mode = DramMode::Tldram;
  CHECK(c.reserved_rows_per_subarray() == c.near_rows_per_subarray);
  c.mode = DramMode::Crow;
  CHECK(c.reserved_rows_per_subarray() == c.copy_rows_per_subarray);
}
