#include "scgfm/decoder.hpp"

#include "scgfm/errors.hpp"
#include "scgfm/rng.hpp"

#include <cmath>

namespace scgfm {

void Decoder::validate() const {
    if (w1.rows() != b1.size() || w2.cols() != w1.rows() || w2.rows() != b2.size())
        throw integrity_error("decoder shape mismatch");
    if (!w1.allFinite() || !b1.allFinite() || !w2.allFinite() || !b2.allFinite())
        throw numerical_error("non-finite decoder parameter");
}

DecoderGrads DecoderGrads::zero(const Decoder& d) {
    DecoderGrads g;
    g.w1 = Eigen::MatrixXd::Zero(d.w1.rows(), d.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(d.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(d.w2.rows(), d.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(d.b2.size());
    g.input = Eigen::VectorXd::Zero(d.w1.cols());
    return g;
}

void DecoderGrads::accumulate(const DecoderGrads& other, double scale) {
    w1 += scale * other.w1;
    b1 += scale * other.b1;
    w2 += scale * other.w2;
    b2 += scale * other.b2;
    input += scale * other.input;
}

Decoder init_decoder(int k, int hidden, int r, std::uint64_t seed) {
    if (k < 1 || hidden < 1 || r < 1) throw integrity_error("init_decoder: bad dimensions");
    Rng rng(seed);
    Decoder d;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(k));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    d.w1.resize(hidden, k);
    d.b1.resize(hidden);
    d.w2.resize(r, hidden);
    d.b2.resize(r);
    for (int i = 0; i < hidden; ++i)
        for (int j = 0; j < k; ++j) d.w1(i, j) = rng.uniform(-s1, s1);
    for (int i = 0; i < hidden; ++i) d.b1[i] = rng.uniform(-s1, s1);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < hidden; ++j) d.w2(i, j) = rng.uniform(-s2, s2);
    for (int i = 0; i < r; ++i) d.b2[i] = rng.uniform(-s2, s2);
    return d;
}

Eigen::VectorXd decode(const Decoder& d, const Eigen::VectorXd& w) {
    if (w.size() != d.input_dim()) throw integrity_error("decode: input length mismatch");
    const Eigen::VectorXd h = (d.w1 * w + d.b1).cwiseMax(0.0);
    return d.w2 * h + d.b2;
}

DecoderGrads decode_backward(const Decoder& d, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& upstream) {
    if (w.size() != d.input_dim() || upstream.size() != d.output_dim())
        throw integrity_error("decode_backward: shape mismatch");
    const Eigen::VectorXd pre = d.w1 * w + d.b1;
    const Eigen::VectorXd h = pre.cwiseMax(0.0);
    DecoderGrads g;
    g.w2 = upstream * h.transpose();
    g.b2 = upstream;
    Eigen::VectorXd dh = d.w2.transpose() * upstream;
    for (int i = 0; i < dh.size(); ++i)
        if (pre[i] <= 0.0) dh[i] = 0.0;  // rectifier derivative, 0 at the kink
    g.w1 = dh * w.transpose();
    g.b1 = dh;
    g.input = d.w1.transpose() * dh;
    return g;
}

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
    if (m.size() == 0) return 0.0;
    const Eigen::MatrixXd g = m.transpose() * m;
    Eigen::VectorXd v = Eigen::VectorXd::Ones(g.rows()).normalized();
    double lam = 0.0;
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd next = g * v;
        const double norm = next.norm();
        if (norm == 0.0) return 0.0;
        next /= norm;
        const double new_lam = next.dot(g * next);
        if (std::abs(new_lam - lam) < 1e-8 * std::max(1.0, std::abs(new_lam))) {
            lam = new_lam;
            break;
        }
        lam = new_lam;
        v = next;
    }
    return std::sqrt(std::max(0.0, lam));
}

}  // namespace

double lipschitz_bound(const Decoder& d) {
    d.validate();
    return spectral_norm(d.w1) * spectral_norm(d.w2);
}

}  // namespace scgfm
