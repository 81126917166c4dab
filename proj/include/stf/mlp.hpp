#pragma once

#include "stf/rng.hpp"
#include "stf/types.hpp"

namespace stf {

/// Fixed-shape fully connected net: in -> hidden -> hidden -> out with tanh
/// hidden activations and a linear head. The smooth activation keeps the
/// conditioner C^1, so pointwise Jacobians of the coupling map are
/// well-defined everywhere inside a hash cell.
class Mlp {
  public:
    Mlp() = default;
    Mlp(int in_dim, int hidden_dim, int out_dim);

    /// Xavier-uniform hidden layers; the output layer stays zero so the
    /// coupling blocks start as the identity map.
    void init_random(Rng& rng, bool zero_output = true);

    int in_dim() const { return static_cast<int>(w1_.cols()); }
    int hidden_dim() const { return static_cast<int>(w1_.rows()); }
    int out_dim() const { return static_cast<int>(w3_.rows()); }
    std::size_t param_count() const;

    struct Cache {
        VecX x;   // input
        VecX h1;  // tanh activations, layer 1
        VecX h2;  // tanh activations, layer 2
    };

    VecX forward(const VecX& x, Cache* cache = nullptr) const;
    MatX forward_batch(const MatX& x) const;  // columns are samples

    /// Joint value + directional-derivative evaluation: given input tangents
    /// tu, tv (columns matching x's columns), returns out and the tangents of
    /// out along each input tangent.
    void forward_batch_with_tangents(const MatX& x, const MatX& tu, const MatX& tv, MatX& out,
                                     MatX& out_du, MatX& out_dv) const;

    struct Grad {
        MatX w1, w2, w3;
        VecX b1, b2, b3;
        void setZero(const Mlp& net);
        void add_scaled(const Grad& other, double s);
    };

    /// Accumulates parameter gradients into g; optionally returns dL/dx.
    void backward(const Cache& cache, const VecX& d_out, Grad& g, VecX* d_x = nullptr) const;

    /// d(out)/d(x) as an out_dim x in_dim matrix (no parameter grads).
    MatX input_jacobian(const Cache& cache) const;

    // Parameter access in serialization order: w1, b1, w2, b2, w3, b3.
    MatX& w1() { return w1_; }
    MatX& w2() { return w2_; }
    MatX& w3() { return w3_; }
    VecX& b1() { return b1_; }
    VecX& b2() { return b2_; }
    VecX& b3() { return b3_; }
    const MatX& w1() const { return w1_; }
    const MatX& w2() const { return w2_; }
    const MatX& w3() const { return w3_; }
    const VecX& b1() const { return b1_; }
    const VecX& b2() const { return b2_; }
    const VecX& b3() const { return b3_; }

  private:
    MatX w1_, w2_, w3_;
    VecX b1_, b2_, b3_;
};

}  // namespace stf
