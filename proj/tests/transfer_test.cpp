#include <gtest/gtest.h>

#include <atomic>
#include <cstring>
#include <random>
#include <thread>
#include <vector>

#include "fogfl/transfer.hpp"

namespace fogfl {
namespace {

VersionedWeights sample_weights(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> w(dim);
  for (auto& x : w) x = n(rng);
  return VersionedWeights{WeightVector(std::move(w)), 17, 3, std::nullopt};
}

struct FakeClock {
  double now = 1000.0;
  Clock fn() {
    return [this] { return now; };
  }
};

TEST(WeightBlob, LayoutAndRoundTrip) {
  const auto vw = sample_weights(5, 1);
  const Bytes blob = encode_weight_blob(vw);
  ASSERT_EQ(blob.size(), kBlobHeaderBytes + 12 + 8 * 5);
  EXPECT_EQ(std::memcmp(blob.data(), "FLWT", 4), 0);
  EXPECT_EQ(blob[4], 1);
  EXPECT_EQ(blob[5], 0);
  EXPECT_EQ(decode_weight_blob(blob), vw);
  Bytes bad = blob;
  bad[0] = 'X';
  EXPECT_THROW(decode_weight_blob(bad), Error);
  bad = blob;
  bad.pop_back();
  EXPECT_THROW(decode_weight_blob(bad), Error);
}

TEST(TransferService, ExportRedeemBitwise) {
  Warehouse wh;
  FakeClock clock;
  TransferService svc(wh, Endpoint{"127.0.0.1", 1}, clock.fn());
  auto vw = sample_weights(300, 2);
  const auto c = svc.export_weights(vw);
  EXPECT_EQ(c.expires_at, clock.now + kDefaultCredentialTtl);
  EXPECT_TRUE(c.one_time);
  const Bytes got = svc.redeem_bytes(c.token);
  EXPECT_EQ(got, encode_weight_blob(vw));
  EXPECT_EQ(wh.size(), 0u);
}

TEST(TransferService, DistinctTokensAndMinimalDim) {
  Warehouse wh;
  TransferService svc(wh, Endpoint{"127.0.0.1", 1});
  const auto vw = VersionedWeights{WeightVector{0.25}, 0, 0, std::nullopt};
  const auto a = svc.export_weights(vw), b = svc.export_weights(vw);
  EXPECT_NE(a.token, b.token);
  EXPECT_EQ(svc.redeem(a), vw);
}

TEST(TransferService, RedeemErrors) {
  Warehouse wh;
  FakeClock clock;
  TransferService svc(wh, Endpoint{"127.0.0.1", 1}, clock.fn(), 10.0);
  const auto c = svc.export_weights(sample_weights(3, 3));
  svc.redeem(c);
  auto code_of = [&](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  EXPECT_EQ(code_of([&] { svc.redeem(c); }), Errc::AlreadyRedeemed);
  EXPECT_EQ(code_of([&] { svc.redeem_bytes("nope"); }), Errc::UnknownToken);
  const auto late = svc.export_weights(sample_weights(3, 4));
  clock.now = late.expires_at + 1.0;
  EXPECT_EQ(code_of([&] { svc.redeem(late); }), Errc::Expired);
}

TEST(TransferService, GcExpired) {
  Warehouse wh;
  FakeClock clock;
  TransferService svc(wh, Endpoint{"127.0.0.1", 1}, clock.fn(), 10.0);
  EXPECT_EQ(svc.gc_expired(clock.now), 0u);
  for (int i = 0; i < 3; ++i) svc.export_weights(sample_weights(2, i));
  clock.now += 20.0;
  std::vector<TransferCredential> live;
  for (int i = 0; i < 2; ++i) live.push_back(svc.export_weights(sample_weights(2, 10 + i)));
  EXPECT_EQ(svc.gc_expired(clock.now), 3u);
  EXPECT_EQ(svc.gc_expired(clock.now), 0u);
  EXPECT_EQ(wh.size(), 2u);
  for (const auto& c : live) EXPECT_NO_THROW(svc.redeem(c));
}

TEST(TransferService, ExactlyOnceUnderConcurrency) {
  Warehouse wh;
  TransferService svc(wh, Endpoint{"127.0.0.1", 1});
  for (int trial = 0; trial < 20; ++trial) {
    const auto c = svc.export_weights(sample_weights(64, trial));
    std::atomic<int> wins{0}, already{0};
    std::atomic<bool> go{false};
    std::vector<std::thread> ts;
    for (int i = 0; i < 32; ++i) {
      ts.emplace_back([&] {
        while (!go.load()) std::this_thread::yield();
        try {
          svc.redeem(c);
          ++wins;
        } catch (const Error& e) {
          if (e.code() == Errc::AlreadyRedeemed) ++already;
        }
      });
    }
    go.store(true);
    for (auto& t : ts) t.join();
    EXPECT_EQ(wins.load(), 1);
    EXPECT_EQ(already.load(), 31);
  }
}

TEST(BlobServerTest, FetchOverLoopback) {
  Warehouse wh;
  TransferService svc(wh, Endpoint{});
  BlobServer server(Endpoint{"127.0.0.1", 0}, svc);
  svc.set_endpoint(server.endpoint());
  const auto vw = sample_weights(1000, 9);
  const auto c = svc.export_weights(vw);
  EXPECT_EQ(c.endpoint, server.endpoint());
  auto got = fetch_weights(c, WorkerId{4});
  EXPECT_EQ(got.weights, vw.weights);
  EXPECT_EQ(got.base_version, 17u);
  EXPECT_EQ(got.local_epochs, 3u);
  EXPECT_EQ(got.owner, WorkerId{4});
  try {
    fetch_weights(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::AlreadyRedeemed);
  }
}

TEST(BlobServerTest, ConcurrentFetchExactlyOnce) {
  Warehouse wh;
  TransferService svc(wh, Endpoint{});
  BlobServer server(Endpoint{"127.0.0.1", 0}, svc);
  svc.set_endpoint(server.endpoint());
  const auto c = svc.export_weights(sample_weights(128, 5));
  std::atomic<int> wins{0};
  std::vector<std::thread> ts;
  for (int i = 0; i < 32; ++i) {
    ts.emplace_back([&] {
      try {
        fetch_weights(c);
        ++wins;
      } catch (const Error&) {
      }
    });
  }
  for (auto& t : ts) t.join();
  EXPECT_EQ(wins.load(), 1);
}

}  // namespace
}  // namespace fogfl
