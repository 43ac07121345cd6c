#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace scgfm {

// Two-layer rectifier MLP mapping K coordinates to r statistics.
struct Decoder {
    Eigen::MatrixXd w1;  // hidden x K
    Eigen::VectorXd b1;  // hidden
    Eigen::MatrixXd w2;  // r x hidden
    Eigen::VectorXd b2;  // r

    int input_dim() const { return static_cast<int>(w1.cols()); }
    int hidden_dim() const { return static_cast<int>(w1.rows()); }
    int output_dim() const { return static_cast<int>(w2.rows()); }
    void validate() const;
};

struct DecoderGrads {
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
    Eigen::VectorXd input;  // gradient wrt the K-dim input

    static DecoderGrads zero(const Decoder& d);
    void accumulate(const DecoderGrads& other, double scale);
};

// Uniform +-1/sqrt(fan_in) init, seeded.
Decoder init_decoder(int k, int hidden, int r, std::uint64_t seed);

Eigen::VectorXd decode(const Decoder& d, const Eigen::VectorXd& w);

// Chain rule for upstream dL/dy; rectifier derivative at 0 is 0.
DecoderGrads decode_backward(const Decoder& d, const Eigen::VectorXd& w,
                             const Eigen::VectorXd& upstream);

// Product of the layer spectral norms (power iteration, 100 steps, tol 1e-8);
// an upper bound on the map's Lipschitz constant.
double lipschitz_bound(const Decoder& d);

}  // namespace scgfm
