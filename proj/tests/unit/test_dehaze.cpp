#include "smokesplat/dehaze.hpp"
#include "smokesplat/error.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace smokesplat;
using namespace smokesplat::dehaze;

TEST(DarkChannel, MatchesNaive) {
    for (int seed = 0; seed < 5; ++seed) {
        const Image img = oracle::random_image(13, 9, seed);
        for (int r : {0, 1, 3, 7}) {
            EXPECT_EQ(dark_channel(img, r), oracle::dark_channel(img, r)) << "r=" << r;
        }
    }
}

TEST(DarkChannel, RadiusZeroIsChannelMin) {
    const Image img = oracle::random_image(6, 6, 9);
    const GrayMap d = dark_channel(img, 0);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x)
            EXPECT_EQ(d(x, y), std::min({img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)}));
}

TEST(DarkChannel, Monotone) {
    for (int seed = 0; seed < 10; ++seed) {
        const Image lo = oracle::random_image(12, 12, seed, 0.0, 0.6);
        const Image bump = oracle::random_image(12, 12, seed + 100, 0.0, 0.4);
        std::vector<double> hi(lo.data().begin(), lo.data().end());
        for (std::size_t i = 0; i < hi.size(); ++i) hi[i] += bump.data()[i];
        const GrayMap a = dark_channel(lo, 2);
        const GrayMap b = dark_channel(Image(12, 12, hi), 2);
        for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_LE(a.values[i], b.values[i]);
    }
}

TEST(Airlight, MatchesFullSort) {
    for (int seed = 0; seed < 5; ++seed) {
        const Image img = oracle::random_image(20, 15, seed);
        const GrayMap dark = dark_channel(img, 2);
        for (double f : {0.001, 0.01, 0.1, 1.0}) {
            const auto got = estimate_airlight(img, dark, f).a;
            const auto want = oracle::airlight(img, dark, f);
            for (int c = 0; c < 3; ++c) EXPECT_NEAR(got[c], want[c], 1e-12);
        }
    }
}

TEST(Airlight, TiesGoToLowerIndexAndFloor) {
    // Constant dark channel: the single selected pixel is the first one.
    Image img(3, 1, {0.0, 0.0, 0.0, 0.5, 0.5, 0.5, 1.0, 1.0, 1.0});
    const GrayMap flat(3, 1, 0.2);
    const auto a = estimate_airlight(img, flat, 0.001).a;
    for (double v : a) EXPECT_EQ(v, kAirlightFloor);
    EXPECT_THROW(estimate_airlight(img, flat, 0.0), InvalidArgument);
    EXPECT_THROW(estimate_airlight(img, GrayMap(2, 1), 0.5), DimensionMismatch);
}

TEST(Transmission, InUnitInterval) {
    for (int seed = 0; seed < 10; ++seed) {
        const Image img = oracle::random_image(16, 16, seed);
        Airlight a;
        a.a = {0.05 + 0.1 * seed, 0.3, 1.0};
        for (double omega : {0.0, 0.5, 0.95, 1.0}) {
            const auto t = estimate_transmission(img, a, omega, 3);
            for (double v : t.t.values) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
}

TEST(BoxMean, TruncatedWindows) {
    const GrayMap src = oracle::random_map(11, 7, 3);
    const GrayMap got = box_mean(src, 2);
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 11; ++x) {
            double s = 0;
            int n = 0;
            for (int yy = std::max(0, y - 2); yy <= std::min(6, y + 2); ++yy)
                for (int xx = std::max(0, x - 2); xx <= std::min(10, x + 2); ++xx, ++n) s += src(xx, yy);
            EXPECT_NEAR(got(x, y), s / n, 1e-13);
        }
    }
}

TEST(GuidedFilter, MatchesNaive) {
    for (int seed = 0; seed < 8; ++seed) {
        const GrayMap guide = oracle::random_map(16, 16, seed);
        const GrayMap src = oracle::random_map(16, 16, seed + 50);
        for (int r : {0, 1, 4, 30}) {
            for (double eps : {1e-3, 0.1}) {
                const GrayMap got = guided_filter(guide, src, r, eps);
                const GrayMap want = oracle::guided_filter(guide, src, r, eps);
                for (std::size_t i = 0; i < got.values.size(); ++i) {
                    ASSERT_NEAR(got.values[i], want.values[i], 1e-10) << "r=" << r << " eps=" << eps;
                }
            }
        }
    }
    EXPECT_THROW(guided_filter(GrayMap(4, 4), GrayMap(4, 5), 1, 0.1), DimensionMismatch);
    EXPECT_THROW(guided_filter(GrayMap(4, 4), GrayMap(4, 4), 1, 0.0), InvalidArgument);
}

TEST(GuidedFilter, ConstantSourceIsPreserved) {
    const GrayMap guide = oracle::random_map(10, 10, 1);
    const GrayMap out = guided_filter(guide, GrayMap(10, 10, 0.37), 3, 1e-3);
    for (double v : out.values) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Recover, InvertsHazeModel) {
    for (int seed = 0; seed < 20; ++seed) {
        const Image clean = oracle::random_image(12, 12, seed);
        TransmissionMap t{oracle::random_map(12, 12, seed + 1000, 0.1, 1.0)};
        Airlight a;
        a.a = {0.7, 0.8, 0.9};
        const Image hazy = apply_haze(clean, t, a);
        const auto raw = recover_radiance_raw(hazy, a, t, 0.1);
        for (std::size_t i = 0; i < raw.size(); ++i) ASSERT_NEAR(raw[i], clean.data()[i], 1e-6);
        const Image rec = recover_radiance(hazy, a, t, 0.1);
        for (std::size_t i = 0; i < raw.size(); ++i) EXPECT_NEAR(rec.data()[i], clean.data()[i], 1e-6);
    }
}

TEST(Recover, FloorLimitsAmplification) {
    const Image hazy(2, 1, 0.9, 0.9, 0.9);
    TransmissionMap t{GrayMap(2, 1, 0.0)};
    Airlight a;
    a.a = {0.5, 0.5, 0.5};
    const auto raw = recover_radiance_raw(hazy, a, t, 0.25);
    // (0.9 - 0.5) / 0.25 + 0.5
    EXPECT_NEAR(raw[0], 2.1, 1e-12);
    EXPECT_EQ(recover_radiance(hazy, a, t, 0.25).at(0, 0, 0), 1.0);
}

TEST(Dehaze, DeterministicShapePreservingAndValidated) {
    const Image img = oracle::random_image(40, 30, 4, 0.3, 0.9);
    DehazeParams p;
    p.guided_radius = 8;
    const Image a = dehaze::dehaze(img, p);
    const Image b = dehaze::dehaze(img, p);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.width(), 40);
    EXPECT_EQ(a.height(), 30);
    const auto detail = dehaze_detailed(img, p);
    EXPECT_EQ(detail.image, a);
    for (double v : detail.refined_transmission.t.values) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }

    DehazeParams bad = p;
    bad.omega = 1.5;
    EXPECT_THROW(dehaze::dehaze(img, bad), InvalidArgument);
    bad = p;
    bad.t_floor = 0.0;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = p;
    bad.patch_radius = -1;
    EXPECT_THROW(bad.validate(), InvalidArgument);
    bad = p;
    bad.airlight_fraction = 1.5;
    EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Dehaze, UniformHazeOnDarkPriorImageIsRemoved) {
    // A clean image whose every patch has a zero channel satisfies the prior
    // exactly; with uniform t the estimate recovers it up to the omega bias.
    std::vector<double> d(32 * 32 * 3);
    smokesplat::Rng rng(5);
    for (std::size_t i = 0; i < d.size(); i += 3) {
        d[i] = rng.uniform(0.2, 0.9);
        d[i + 1] = rng.uniform(0.2, 0.9);
        d[i + 2] = 0.0;
    }
    // A 10x10 block of sky (radiance equal to the airlight) anchors the
    // airlight estimate.
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 10; ++x)
            for (int c = 0; c < 3; ++c) d[(y * 32 + x) * 3 + c] = 0.85;
    const Image clean(32, 32, d);
    Airlight a;
    a.a = {0.85, 0.85, 0.85};
    const Image hazy = apply_haze(clean, TransmissionMap{GrayMap(32, 32, 0.5)}, a);
    DehazeParams p;
    p.patch_radius = 2;
    p.guided_radius = 4;
    p.airlight_fraction = 0.01;
    const Image out = dehaze::dehaze(hazy, p);
    EXPECT_GT(oracle::psnr(out, clean), oracle::psnr(hazy, clean) + 3.0);
}
