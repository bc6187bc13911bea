#include "doctest.h"

#include <vector>

#include "eev/common.hpp"
#include "eev/kernels.hpp"

using namespace eev;
namespace K = eev::kernels;

namespace {

std::vector<float> random_vec(std::size_t n, Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    return v;
}

} // namespace

// The OpenMP kernels must be bit-identical to the serial references for any
// thread count: each output element is accumulated in the same order.
TEST_CASE("conv2d serial and OpenMP backends agree bitwise") {
    Rng rng(123);
    for (int stride : {1, 2}) {
        K::Conv2dDims d{2, 3, 10, 12, 4, 5, stride, 2};
        auto x = random_vec(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, rng);
        auto w = random_vec(static_cast<std::size_t>(d.cout) * d.cin * d.k * d.k, rng);
        auto b = random_vec(d.cout, rng);
        const std::size_t out_n = static_cast<std::size_t>(d.n) * d.cout * d.out_h() * d.out_w();
        std::vector<float> ys(out_n), yo(out_n);
        K::serial::conv2d_forward(x.data(), w.data(), b.data(), ys.data(), d);
        K::omp::conv2d_forward(x.data(), w.data(), b.data(), yo.data(), d);
        CHECK(ys == yo);

        auto gy = random_vec(out_n, rng);
        std::vector<float> gxs(x.size(), 0.0f), gxo(x.size(), 0.0f);
        K::serial::conv2d_backward_input(gy.data(), w.data(), gxs.data(), d);
        K::omp::conv2d_backward_input(gy.data(), w.data(), gxo.data(), d);
        CHECK(gxs == gxo);

        std::vector<float> gws(w.size(), 0.0f), gwo(w.size(), 0.0f);
        K::serial::conv2d_backward_weight(gy.data(), x.data(), gws.data(), d);
        K::omp::conv2d_backward_weight(gy.data(), x.data(), gwo.data(), d);
        CHECK(gws == gwo);

        std::vector<float> gbs(d.cout, 0.0f), gbo(d.cout, 0.0f);
        K::serial::conv2d_backward_bias(gy.data(), gbs.data(), d);
        K::omp::conv2d_backward_bias(gy.data(), gbo.data(), d);
        CHECK(gbs == gbo);
    }
}

TEST_CASE("deconv2d serial and OpenMP backends agree bitwise") {
    Rng rng(321);
    for (int stride : {1, 2}) {
        K::Deconv2dDims d{1, 4, 6, 7, 3, 5, stride};
        auto x = random_vec(static_cast<std::size_t>(d.n) * d.cin * d.h * d.w, rng);
        auto w = random_vec(static_cast<std::size_t>(d.cin) * d.cout * d.k * d.k, rng);
        auto b = random_vec(d.cout, rng);
        const std::size_t out_n = static_cast<std::size_t>(d.n) * d.cout * d.out_h() * d.out_w();
        std::vector<float> ys(out_n), yo(out_n);
        K::serial::deconv2d_forward(x.data(), w.data(), b.data(), ys.data(), d);
        K::omp::deconv2d_forward(x.data(), w.data(), b.data(), yo.data(), d);
        CHECK(ys == yo);

        auto gy = random_vec(out_n, rng);
        std::vector<float> gxs(x.size(), 0.0f), gxo(x.size(), 0.0f);
        K::serial::deconv2d_backward_input(gy.data(), w.data(), gxs.data(), d);
        K::omp::deconv2d_backward_input(gy.data(), w.data(), gxo.data(), d);
        CHECK(gxs == gxo);

        std::vector<float> gws(w.size(), 0.0f), gwo(w.size(), 0.0f);
        K::serial::deconv2d_backward_weight(gy.data(), x.data(), gws.data(), d);
        K::omp::deconv2d_backward_weight(gy.data(), x.data(), gwo.data(), d);
        CHECK(gws == gwo);
    }
}

TEST_CASE("warp serial and OpenMP backends agree bitwise") {
    Rng rng(456);
    const int n = 2, c = 3, h = 9, w = 8;
    auto src = random_vec(static_cast<std::size_t>(n) * c * h * w, rng);
    auto flow = random_vec(static_cast<std::size_t>(n) * 2 * h * w, rng);
    std::vector<float> ys(src.size()), yo(src.size());
    K::serial::warp_forward(src.data(), flow.data(), ys.data(), n, c, h, w);
    K::omp::warp_forward(src.data(), flow.data(), yo.data(), n, c, h, w);
    CHECK(ys == yo);

    auto gy = random_vec(src.size(), rng);
    std::vector<float> gss(src.size(), 0.0f), gso(src.size(), 0.0f);
    std::vector<float> gfs(flow.size(), 0.0f), gfo(flow.size(), 0.0f);
    K::serial::warp_backward(src.data(), flow.data(), gy.data(), gss.data(), gfs.data(), n, c, h, w);
    K::omp::warp_backward(src.data(), flow.data(), gy.data(), gso.data(), gfo.data(), n, c, h, w);
    CHECK(gss == gso);
    CHECK(gfs == gfo);
}

TEST_CASE("pool and upsample backends agree bitwise") {
    Rng rng(789);
    const int n = 2, c = 4, h = 8, w = 6;
    auto x = random_vec(static_cast<std::size_t>(n) * c * h * w, rng);

    std::vector<float> ps(static_cast<std::size_t>(n) * c * (h / 2) * (w / 2));
    auto po = ps;
    K::serial::avg_pool2_forward(x.data(), ps.data(), n, c, h, w);
    K::omp::avg_pool2_forward(x.data(), po.data(), n, c, h, w);
    CHECK(ps == po);

    std::vector<float> gs(n * c), go(n * c);
    K::serial::global_avg_pool_forward(x.data(), gs.data(), n, c, h, w);
    K::omp::global_avg_pool_forward(x.data(), go.data(), n, c, h, w);
    CHECK(gs == go);

    std::vector<float> us(static_cast<std::size_t>(n) * c * h * 2 * w * 2);
    auto uo = us;
    K::serial::upsample_nearest2_forward(x.data(), us.data(), n, c, h, w);
    K::omp::upsample_nearest2_forward(x.data(), uo.data(), n, c, h, w);
    CHECK(us == uo);
}

TEST_CASE("backend dispatch honors set_backend") {
    const auto saved = K::backend();
    K::set_backend(K::Backend::serial);
    CHECK(K::backend() == K::Backend::serial);
    K::set_backend(saved);
}
