#include "stf/mlp.hpp"

#include <cmath>

namespace stf {

Mlp::Mlp(int in_dim, int hidden_dim, int out_dim) {
    w1_ = MatX::Zero(hidden_dim, in_dim);
    b1_ = VecX::Zero(hidden_dim);
    w2_ = MatX::Zero(hidden_dim, hidden_dim);
    b2_ = VecX::Zero(hidden_dim);
    w3_ = MatX::Zero(out_dim, hidden_dim);
    b3_ = VecX::Zero(out_dim);
}

void Mlp::init_random(Rng& rng, bool zero_output) {
    auto xavier = [&](MatX& w) {
        double bound = std::sqrt(6.0 / (w.rows() + w.cols()));
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    };
    xavier(w1_);
    xavier(w2_);
    b1_.setZero();
    b2_.setZero();
    if (zero_output) {
        w3_.setZero();
        b3_.setZero();
    } else {
        xavier(w3_);
        for (Eigen::Index i = 0; i < b3_.size(); ++i) b3_[i] = rng.uniform(-0.1, 0.1);
    }
}

std::size_t Mlp::param_count() const {
    return static_cast<std::size_t>(w1_.size() + b1_.size() + w2_.size() + b2_.size() +
                                    w3_.size() + b3_.size());
}

VecX Mlp::forward(const VecX& x, Cache* cache) const {
    VecX h1 = ((w1_ * x + b1_).array().tanh()).matrix();
    VecX h2 = ((w2_ * h1 + b2_).array().tanh()).matrix();
    VecX out = w3_ * h2 + b3_;
    if (cache) {
        cache->x = x;
        cache->h1 = std::move(h1);
        cache->h2 = std::move(h2);
        return out;
    }
    return out;
}

MatX Mlp::forward_batch(const MatX& x) const {
    MatX h1 = ((w1_ * x).colwise() + b1_).array().tanh();
    MatX h2 = ((w2_ * h1).colwise() + b2_).array().tanh();
    return (w3_ * h2).colwise() + b3_;
}

void Mlp::forward_batch_with_tangents(const MatX& x, const MatX& tu, const MatX& tv, MatX& out,
                                      MatX& out_du, MatX& out_dv) const {
    MatX h1 = ((w1_ * x).colwise() + b1_).array().tanh();
    MatX d1 = 1.0 - h1.array().square();  // tanh'
    MatX t1u = d1.array() * (w1_ * tu).array();
    MatX t1v = d1.array() * (w1_ * tv).array();
    MatX h2 = ((w2_ * h1).colwise() + b2_).array().tanh();
    MatX d2 = 1.0 - h2.array().square();
    MatX t2u = d2.array() * (w2_ * t1u).array();
    MatX t2v = d2.array() * (w2_ * t1v).array();
    out = (w3_ * h2).colwise() + b3_;
    out_du = w3_ * t2u;
    out_dv = w3_ * t2v;
}

void Mlp::Grad::setZero(const Mlp& net) {
    w1 = MatX::Zero(net.w1().rows(), net.w1().cols());
    b1 = VecX::Zero(net.b1().size());
    w2 = MatX::Zero(net.w2().rows(), net.w2().cols());
    b2 = VecX::Zero(net.b2().size());
    w3 = MatX::Zero(net.w3().rows(), net.w3().cols());
    b3 = VecX::Zero(net.b3().size());
}

void Mlp::Grad::add_scaled(const Grad& other, double s) {
    w1 += s * other.w1;
    b1 += s * other.b1;
    w2 += s * other.w2;
    b2 += s * other.b2;
    w3 += s * other.w3;
    b3 += s * other.b3;
}

void Mlp::backward(const Cache& cache, const VecX& d_out, Grad& g, VecX* d_x) const {
    g.w3.noalias() += d_out * cache.h2.transpose();
    g.b3 += d_out;
    VecX dh2 = w3_.transpose() * d_out;
    VecX dz2 = (dh2.array() * (1.0 - cache.h2.array().square())).matrix();
    g.w2.noalias() += dz2 * cache.h1.transpose();
    g.b2 += dz2;
    VecX dh1 = w2_.transpose() * dz2;
    VecX dz1 = (dh1.array() * (1.0 - cache.h1.array().square())).matrix();
    g.w1.noalias() += dz1 * cache.x.transpose();
    g.b1 += dz1;
    if (d_x) *d_x = w1_.transpose() * dz1;
}

MatX Mlp::input_jacobian(const Cache& cache) const {
    MatX j1 = (1.0 - cache.h1.array().square()).matrix().asDiagonal() * w1_;
    MatX j2 = (1.0 - cache.h2.array().square()).matrix().asDiagonal() * (w2_ * j1);
    return w3_ * j2;
}

}  // namespace stf
