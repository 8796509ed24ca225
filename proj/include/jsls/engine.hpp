#pragma once

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "jsls/common.hpp"

namespace jsls {
namespace engine {

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

class EngineError : public Error {
public:
    enum class Kind { ShapeMismatch, EmptySegment, NonScalarLoss, MissingGrad };
    EngineError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

class CheckpointError : public Error {
public:
    enum class Kind { VersionMismatch, ShapeMismatch, CorruptFile };
    CheckpointError(Kind kind, const std::string& msg) : Error(msg), kind(kind) {}
    Kind kind;
};

// Dense row-major matrix of 64-bit floats. Vectors are 1xN or Nx1.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), 0.0) {}

    static Matrix zeros(int r, int c) { return Matrix(r, c); }
    static Matrix scalar(double v) {
        Matrix m(1, 1);
        m.a[0] = v;
        return m;
    }
    static Matrix row(const std::vector<double>& v) {
        Matrix m(1, static_cast<int>(v.size()));
        m.a = v;
        return m;
    }
    static Matrix column(const std::vector<double>& v) {
        Matrix m(static_cast<int>(v.size()), 1);
        m.a = v;
        return m;
    }
    static Matrix uniform(int r, int c, double bound, Rng& rng) {
        Matrix m(r, c);
        for (double& x : m.a) x = (2.0 * rng.uniform01() - 1.0) * bound;
        return m;
    }

    double* row_ptr(int r) { return a.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
    const double* row_ptr(int r) const { return a.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(cols); }
    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c)]; }
    std::size_t size() const { return a.size(); }

    bool operator==(const Matrix&) const = default;
};

namespace detail {

inline void require(bool ok, EngineError::Kind kind, const std::string& msg) {
    if (!ok) throw EngineError(kind, msg);
}

// C += A * B
inline void addmul_nn(Matrix& C, const Matrix& A, const Matrix& B) {
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        for (int k = 0; k < A.cols; ++k) {
            const double av = arow[k];
            const double* brow = B.row_ptr(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

// Eight independent accumulator lanes so the reduction vectorizes.
inline double dot(const double* a, const double* b, int n) {
    double lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int k = 0;
    for (; k + 8 <= n; k += 8) {
        for (int l = 0; l < 8; ++l) lanes[l] += a[k + l] * b[k + l];
    }
    double acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; k < n; ++k) acc += a[k] * b[k];
    return acc;
}

// C += A * B^T
inline void addmul_nt(Matrix& C, const Matrix& A, const Matrix& B) {
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        double* crow = C.row_ptr(i);
        for (int j = 0; j < B.rows; ++j) {
            crow[j] += dot(arow, B.row_ptr(j), A.cols);
        }
    }
}

// C += A^T * B
inline void addmul_tn(Matrix& C, const Matrix& A, const Matrix& B) {
    for (int i = 0; i < A.rows; ++i) {
        const double* arow = A.row_ptr(i);
        const double* brow = B.row_ptr(i);
        for (int k = 0; k < A.cols; ++k) {
            const double av = arow[k];
            double* crow = C.row_ptr(k);
            for (int j = 0; j < B.cols; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Reverse-mode computation trace. Ops append nodes; backward() walks the trace
// in reverse and accumulates exact gradients for every node that needs them.
// One tape per worker; results are bit-identical for identical inputs.
// ---------------------------------------------------------------------------
class Tape {
public:
    using NodeId = int;

    NodeId input(Matrix v) { return push(std::move(v), false, nullptr); }

    NodeId leaf(Matrix v, bool requires_grad = true) { return push(std::move(v), requires_grad, nullptr); }

    // Leaf whose value lives outside the tape (e.g. a parameter store). The
    // referenced matrix must stay alive and unchanged until backward() runs.
    NodeId leaf_ref(const Matrix* v, bool requires_grad = true) {
        detail::require(!finalized_, EngineError::Kind::NonScalarLoss, "tape is finalized");
        Node node;
        node.external = v;
        node.requires_grad = requires_grad;
        nodes_.push_back(std::move(node));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    const Matrix& value(NodeId id) const {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        return n.external ? *n.external : n.value;
    }
    const Matrix& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
    bool requires_grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    std::size_t num_nodes() const { return nodes_.size(); }

    NodeId matmul(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        detail::require(A.cols == B.rows, EngineError::Kind::ShapeMismatch,
                        "matmul: " + shape_str(A) + " x " + shape_str(B));
        Matrix C(A.rows, B.cols);
        detail::addmul_nn(C, A, B);
        return push(std::move(C), requires_grad(a) || requires_grad(b), [a, b](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            if (t.requires_grad(a)) detail::addmul_nt(t.grad_buffer(a), g, t.value(b));
            if (t.requires_grad(b)) detail::addmul_tn(t.grad_buffer(b), t.value(a), g);
        });
    }

    // Elementwise sum; b may also be a 1xC row broadcast over a's rows.
    NodeId add(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        const bool broadcast = B.rows == 1 && A.rows != 1 && B.cols == A.cols;
        detail::require(broadcast || (A.rows == B.rows && A.cols == B.cols), EngineError::Kind::ShapeMismatch,
                        "add: " + shape_str(A) + " + " + shape_str(B));
        Matrix C = A;
        if (broadcast) {
            for (int i = 0; i < C.rows; ++i) {
                double* crow = C.row_ptr(i);
                for (int j = 0; j < C.cols; ++j) crow[j] += B.a[static_cast<std::size_t>(j)];
            }
        } else {
            for (std::size_t i = 0; i < C.a.size(); ++i) C.a[i] += B.a[i];
        }
        return push(std::move(C), requires_grad(a) || requires_grad(b),
                    [a, b, broadcast](Tape& t, NodeId self) {
                        const Matrix& g = t.grad(self);
                        if (t.requires_grad(a)) {
                            Matrix& ga = t.grad_buffer(a);
                            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i];
                        }
                        if (t.requires_grad(b)) {
                            Matrix& gb = t.grad_buffer(b);
                            if (broadcast) {
                                for (int i = 0; i < g.rows; ++i) {
                                    const double* grow = g.row_ptr(i);
                                    for (int j = 0; j < g.cols; ++j) gb.a[static_cast<std::size_t>(j)] += grow[j];
                                }
                            } else {
                                for (std::size_t i = 0; i < g.a.size(); ++i) gb.a[i] += g.a[i];
                            }
                        }
                    });
    }

    NodeId mul(NodeId a, NodeId b) {
        const Matrix& A = value(a);
        const Matrix& B = value(b);
        detail::require(A.rows == B.rows && A.cols == B.cols, EngineError::Kind::ShapeMismatch,
                        "mul: " + shape_str(A) + " * " + shape_str(B));
        Matrix C = A;
        for (std::size_t i = 0; i < C.a.size(); ++i) C.a[i] *= B.a[i];
        return push(std::move(C), requires_grad(a) || requires_grad(b), [a, b](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            if (t.requires_grad(a)) {
                Matrix& ga = t.grad_buffer(a);
                const Matrix& B2 = t.value(b);
                for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i] * B2.a[i];
            }
            if (t.requires_grad(b)) {
                Matrix& gb = t.grad_buffer(b);
                const Matrix& A2 = t.value(a);
                for (std::size_t i = 0; i < g.a.size(); ++i) gb.a[i] += g.a[i] * A2.a[i];
            }
        });
    }

    NodeId scale(NodeId a, double c) {
        Matrix C = value(a);
        for (double& x : C.a) x *= c;
        return push(std::move(C), requires_grad(a), [a, c](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            if (!t.requires_grad(a)) return;
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += c * g.a[i];
        });
    }

    NodeId add_const(NodeId a, double c) {
        Matrix C = value(a);
        for (double& x : C.a) x += c;
        return push(std::move(C), requires_grad(a), [a](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            if (!t.requires_grad(a)) return;
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i];
        });
    }

    NodeId neg(NodeId a) { return scale(a, -1.0); }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        detail::require(!parts.empty(), EngineError::Kind::ShapeMismatch, "concat_cols: no inputs");
        const int rows = value(parts[0]).rows;
        int cols = 0;
        bool needs_grad = false;
        for (NodeId p : parts) {
            detail::require(value(p).rows == rows, EngineError::Kind::ShapeMismatch, "concat_cols: row mismatch");
            cols += value(p).cols;
            needs_grad = needs_grad || requires_grad(p);
        }
        Matrix C(rows, cols);
        int off = 0;
        for (NodeId p : parts) {
            const Matrix& P = value(p);
            for (int i = 0; i < rows; ++i) {
                std::memcpy(C.row_ptr(i) + off, P.row_ptr(i), static_cast<std::size_t>(P.cols) * sizeof(double));
            }
            off += P.cols;
        }
        auto parts_copy = std::make_shared<std::vector<NodeId>>(parts);
        return push(std::move(C), needs_grad, [parts_copy](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            int off2 = 0;
            for (NodeId p : *parts_copy) {
                const int w = t.value(p).cols;
                if (t.requires_grad(p)) {
                    Matrix& gp = t.grad_buffer(p);
                    for (int i = 0; i < g.rows; ++i) {
                        const double* grow = g.row_ptr(i) + off2;
                        double* prow = gp.row_ptr(i);
                        for (int j = 0; j < w; ++j) prow[j] += grow[j];
                    }
                }
                off2 += w;
            }
        });
    }

    NodeId slice_cols(NodeId a, int start, int width) {
        const Matrix& A = value(a);
        detail::require(start >= 0 && width >= 1 && start + width <= A.cols, EngineError::Kind::ShapeMismatch,
                        "slice_cols: out of range");
        Matrix C(A.rows, width);
        for (int i = 0; i < A.rows; ++i) {
            std::memcpy(C.row_ptr(i), A.row_ptr(i) + start, static_cast<std::size_t>(width) * sizeof(double));
        }
        return push(std::move(C), requires_grad(a), [a, start, width](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            Matrix& ga = t.grad_buffer(a);
            for (int i = 0; i < g.rows; ++i) {
                const double* grow = g.row_ptr(i);
                double* arow = ga.row_ptr(i) + start;
                for (int j = 0; j < width; ++j) arow[j] += grow[j];
            }
        });
    }

    NodeId leaky_relu(NodeId a, double slope) {
        Matrix C = value(a);
        for (double& x : C.a) x = x > 0.0 ? x : slope * x;
        return push(std::move(C), requires_grad(a), [a, slope](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            const Matrix& A = t.value(a);
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i] * (A.a[i] > 0.0 ? 1.0 : slope);
        });
    }

    NodeId exp_(NodeId a) {
        Matrix C = value(a);
        for (double& x : C.a) x = std::exp(x);
        return push(std::move(C), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            const Matrix& C2 = t.value(self);
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i] * C2.a[i];
        });
    }

    NodeId log_(NodeId a) {
        Matrix C = value(a);
        for (double& x : C.a) x = std::log(x);
        return push(std::move(C), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            const Matrix& A = t.value(a);
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < g.a.size(); ++i) ga.a[i] += g.a[i] / A.a[i];
        });
    }

    NodeId sum_all(NodeId a) {
        double acc = 0.0;
        for (double x : value(a).a) acc += x;
        return push(Matrix::scalar(acc), requires_grad(a), [a](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const double g = t.grad(self).a[0];
            Matrix& ga = t.grad_buffer(a);
            for (double& x : ga.a) x += g;
        });
    }

    // Mean over rows within each segment. Segment ids must be sorted,
    // non-negative, and cover 0..num_segments-1 without gaps.
    NodeId segment_mean(NodeId a, const std::vector<int>& segments, int num_segments) {
        const Matrix& A = value(a);
        check_segments(segments, A.rows, num_segments);
        auto counts = std::make_shared<std::vector<double>>(static_cast<std::size_t>(num_segments), 0.0);
        for (int s : segments) (*counts)[static_cast<std::size_t>(s)] += 1.0;
        Matrix C(num_segments, A.cols);
        for (int i = 0; i < A.rows; ++i) {
            const double* arow = A.row_ptr(i);
            double* crow = C.row_ptr(segments[static_cast<std::size_t>(i)]);
            for (int j = 0; j < A.cols; ++j) crow[j] += arow[j];
        }
        for (int s = 0; s < num_segments; ++s) {
            double* crow = C.row_ptr(s);
            for (int j = 0; j < C.cols; ++j) crow[j] /= (*counts)[static_cast<std::size_t>(s)];
        }
        auto segs = std::make_shared<std::vector<int>>(segments);
        return push(std::move(C), requires_grad(a), [a, segs, counts](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            Matrix& ga = t.grad_buffer(a);
            for (int i = 0; i < ga.rows; ++i) {
                const int s = (*segs)[static_cast<std::size_t>(i)];
                const double inv = 1.0 / (*counts)[static_cast<std::size_t>(s)];
                const double* grow = g.row_ptr(s);
                double* arow = ga.row_ptr(i);
                for (int j = 0; j < ga.cols; ++j) arow[j] += inv * grow[j];
            }
        });
    }

    NodeId mean_pool(NodeId a) {
        return segment_mean(a, std::vector<int>(static_cast<std::size_t>(value(a).rows), 0), 1);
    }

    // Softmax of an n x 1 column within each segment, with per-segment max
    // subtraction for stability.
    NodeId segment_softmax(NodeId a, const std::vector<int>& segments) {
        const Matrix& A = value(a);
        detail::require(A.cols == 1, EngineError::Kind::ShapeMismatch, "segment_softmax: expected a column vector");
        const int nseg = segments.empty() ? 0 : segments.back() + 1;
        check_segments(segments, A.rows, nseg);
        std::vector<double> mx(static_cast<std::size_t>(nseg), -std::numeric_limits<double>::infinity());
        for (int i = 0; i < A.rows; ++i) {
            auto& m = mx[static_cast<std::size_t>(segments[static_cast<std::size_t>(i)])];
            m = std::max(m, A.a[static_cast<std::size_t>(i)]);
        }
        std::vector<double> denom(static_cast<std::size_t>(nseg), 0.0);
        Matrix C(A.rows, 1);
        for (int i = 0; i < A.rows; ++i) {
            const int s = segments[static_cast<std::size_t>(i)];
            C.a[static_cast<std::size_t>(i)] = std::exp(A.a[static_cast<std::size_t>(i)] - mx[static_cast<std::size_t>(s)]);
            denom[static_cast<std::size_t>(s)] += C.a[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < A.rows; ++i) {
            C.a[static_cast<std::size_t>(i)] /= denom[static_cast<std::size_t>(segments[static_cast<std::size_t>(i)])];
        }
        auto segs = std::make_shared<std::vector<int>>(segments);
        auto nseg_copy = nseg;
        return push(std::move(C), requires_grad(a), [a, segs, nseg_copy](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            const Matrix& P = t.value(self);
            Matrix& ga = t.grad_buffer(a);
            std::vector<double> dot(static_cast<std::size_t>(nseg_copy), 0.0);
            for (int i = 0; i < P.rows; ++i) {
                dot[static_cast<std::size_t>((*segs)[static_cast<std::size_t>(i)])] +=
                    g.a[static_cast<std::size_t>(i)] * P.a[static_cast<std::size_t>(i)];
            }
            for (int i = 0; i < P.rows; ++i) {
                const int s = (*segs)[static_cast<std::size_t>(i)];
                ga.a[static_cast<std::size_t>(i)] += P.a[static_cast<std::size_t>(i)] *
                                                     (g.a[static_cast<std::size_t>(i)] - dot[static_cast<std::size_t>(s)]);
            }
        });
    }

    // out[s] = sum over rows i in segment s of w[i] * v[i,:]
    NodeId segment_weighted_sum(NodeId w, NodeId v, const std::vector<int>& segments, int num_segments) {
        const Matrix& W = value(w);
        const Matrix& V = value(v);
        detail::require(W.cols == 1 && W.rows == V.rows, EngineError::Kind::ShapeMismatch,
                        "segment_weighted_sum: weight shape");
        check_segments(segments, V.rows, num_segments);
        Matrix C(num_segments, V.cols);
        for (int i = 0; i < V.rows; ++i) {
            const double wi = W.a[static_cast<std::size_t>(i)];
            const double* vrow = V.row_ptr(i);
            double* crow = C.row_ptr(segments[static_cast<std::size_t>(i)]);
            for (int j = 0; j < V.cols; ++j) crow[j] += wi * vrow[j];
        }
        auto segs = std::make_shared<std::vector<int>>(segments);
        return push(std::move(C), requires_grad(w) || requires_grad(v), [w, v, segs](Tape& t, NodeId self) {
            const Matrix& g = t.grad(self);
            const Matrix& W2 = t.value(w);
            const Matrix& V2 = t.value(v);
            if (t.requires_grad(w)) {
                Matrix& gw = t.grad_buffer(w);
                for (int i = 0; i < V2.rows; ++i) {
                    const double* grow = g.row_ptr((*segs)[static_cast<std::size_t>(i)]);
                    const double* vrow = V2.row_ptr(i);
                    double acc = 0.0;
                    for (int j = 0; j < V2.cols; ++j) acc += grow[j] * vrow[j];
                    gw.a[static_cast<std::size_t>(i)] += acc;
                }
            }
            if (t.requires_grad(v)) {
                Matrix& gv = t.grad_buffer(v);
                for (int i = 0; i < V2.rows; ++i) {
                    const double wi = W2.a[static_cast<std::size_t>(i)];
                    const double* grow = g.row_ptr((*segs)[static_cast<std::size_t>(i)]);
                    double* vrow = gv.row_ptr(i);
                    for (int j = 0; j < V2.cols; ++j) vrow[j] += wi * grow[j];
                }
            }
        });
    }

    NodeId gather_rows(NodeId a, const std::vector<int>& indices) {
        const Matrix& A = value(a);
        for (int i : indices) {
            detail::require(i >= 0 && i < A.rows, EngineError::Kind::ShapeMismatch, "gather_rows: index out of range");
        }
        Matrix C(static_cast<int>(indices.size()), A.cols);
        for (std::size_t i = 0; i < indices.size(); ++i) {
            std::memcpy(C.row_ptr(static_cast<int>(i)), A.row_ptr(indices[i]),
                        static_cast<std::size_t>(A.cols) * sizeof(double));
        }
        auto idx = std::make_shared<std::vector<int>>(indices);
        return push(std::move(C), requires_grad(a), [a, idx](Tape& t, NodeId self) {
            if (!t.requires_grad(a)) return;
            const Matrix& g = t.grad(self);
            Matrix& ga = t.grad_buffer(a);
            for (std::size_t i = 0; i < idx->size(); ++i) {
                const double* grow = g.row_ptr(static_cast<int>(i));
                double* arow = ga.row_ptr((*idx)[i]);
                for (int j = 0; j < g.cols; ++j) arow[j] += grow[j];
            }
        });
    }

    // Reverse pass from a scalar loss. Afterwards the tape is sealed: no
    // further ops may be appended and a second backward is rejected.
    void backward(NodeId loss) {
        detail::require(!finalized_, EngineError::Kind::NonScalarLoss, "backward: tape already finalized");
        const Matrix& L = value(loss);
        if (L.rows != 1 || L.cols != 1) {
            throw EngineError(EngineError::Kind::NonScalarLoss, "backward: loss must be 1x1, got " + shape_str(L));
        }
        finalized_ = true;
        grad_buffer(loss).a[0] = 1.0;
        for (int id = loss; id >= 0; --id) {
            Node& node = nodes_[static_cast<std::size_t>(id)];
            if (node.grad.a.empty() || !node.backward) continue;
            node.backward(*this, id);
        }
    }

    bool finalized() const { return finalized_; }

    Matrix& grad_buffer(NodeId id) {
        Node& node = nodes_[static_cast<std::size_t>(id)];
        if (node.grad.a.empty()) {
            const Matrix& v = node.external ? *node.external : node.value;
            node.grad = Matrix(v.rows, v.cols);
        }
        return node.grad;
    }

private:
    struct Node {
        Matrix value;
        const Matrix* external = nullptr;
        Matrix grad;
        bool requires_grad = false;
        std::function<void(Tape&, NodeId)> backward;
    };

    static std::string shape_str(const Matrix& m) {
        return "(" + std::to_string(m.rows) + "x" + std::to_string(m.cols) + ")";
    }

    static void check_segments(const std::vector<int>& segments, int rows, int num_segments) {
        detail::require(static_cast<int>(segments.size()) == rows, EngineError::Kind::ShapeMismatch,
                        "segment ids must match row count");
        int prev = 0;
        for (int s : segments) {
            detail::require(s >= prev, EngineError::Kind::EmptySegment, "segment ids must be sorted");
            detail::require(s - prev <= 1, EngineError::Kind::EmptySegment, "segment id gap leaves an empty segment");
            prev = s;
        }
        if (num_segments > 0 && (segments.empty() || segments.back() != num_segments - 1)) {
            throw EngineError(EngineError::Kind::EmptySegment, "trailing segments are empty");
        }
        if (num_segments == 0 && !segments.empty()) {
            throw EngineError(EngineError::Kind::EmptySegment, "segments given but zero segments requested");
        }
    }

    NodeId push(Matrix value, bool needs_grad, std::function<void(Tape&, NodeId)> backward_fn) {
        detail::require(!finalized_, EngineError::Kind::NonScalarLoss, "tape is finalized");
        Node node;
        node.value = std::move(value);
        node.requires_grad = needs_grad;
        if (needs_grad) node.backward = std::move(backward_fn);
        nodes_.push_back(std::move(node));
        return static_cast<NodeId>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
    bool finalized_ = false;
};

// ---------------------------------------------------------------------------
// Named parameter tensors with adaptive-moment state.
// ---------------------------------------------------------------------------
struct ParamStore {
    struct Entry {
        Matrix value;
        Matrix grad;
        Matrix m;
        Matrix v;
    };

    std::vector<std::string> order;
    std::map<std::string, Entry> entries;
    long step = 0;
    bool grads_populated = false;

    Matrix& add(const std::string& name, Matrix init) {
        if (entries.count(name)) throw Error("ParamStore::add: duplicate name " + name);
        Entry e;
        e.grad = Matrix(init.rows, init.cols);
        e.m = Matrix(init.rows, init.cols);
        e.v = Matrix(init.rows, init.cols);
        e.value = std::move(init);
        order.push_back(name);
        return entries.emplace(name, std::move(e)).first->second.value;
    }

    Entry& at(const std::string& name) {
        auto it = entries.find(name);
        if (it == entries.end()) throw Error("ParamStore: unknown parameter " + name);
        return it->second;
    }
    const Entry& at(const std::string& name) const {
        auto it = entries.find(name);
        if (it == entries.end()) throw Error("ParamStore: unknown parameter " + name);
        return it->second;
    }

    void zero_grad() {
        for (auto& [name, e] : entries) {
            (void)name;
            std::fill(e.grad.a.begin(), e.grad.a.end(), 0.0);
        }
        grads_populated = false;
    }

    std::size_t num_scalars() const {
        std::size_t n = 0;
        for (const auto& [name, e] : entries) {
            (void)name;
            n += e.value.size();
        }
        return n;
    }

    bool operator==(const ParamStore& other) const {
        if (order != other.order) return false;
        for (const auto& name : order) {
            if (!(at(name).value == other.at(name).value)) return false;
        }
        return true;
    }
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One adaptive-moment update over every parameter; gradients are zeroed after
// the step. Throws MissingGrad when no gradients were accumulated since the
// previous step.
inline void optimizer_step(ParamStore& store, double lr, const AdamConfig& cfg = {}) {
    if (!store.grads_populated) {
        throw EngineError(EngineError::Kind::MissingGrad, "optimizer_step: gradients were never populated");
    }
    store.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
    for (auto& [name, e] : store.entries) {
        (void)name;
        for (std::size_t i = 0; i < e.value.a.size(); ++i) {
            const double g = e.grad.a[i];
            e.m.a[i] = cfg.beta1 * e.m.a[i] + (1.0 - cfg.beta1) * g;
            e.v.a[i] = cfg.beta2 * e.v.a[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = e.m.a[i] / bc1;
            const double vhat = e.v.a[i] / bc2;
            e.value.a[i] -= lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
        }
    }
    store.zero_grad();
}

// Couples one tape with a parameter store: parameters enter the trace as
// leaves, and their gradients are harvested back after the reverse pass.
class BoundTape {
public:
    explicit BoundTape(ParamStore& store) : store_(&store) {}

    Tape& tape() { return tape_; }

    // Parameters enter the trace by reference; the store must not be stepped
    // while traces that reference it are still pending backward.
    Tape::NodeId param(const std::string& name) {
        auto it = bound_.find(name);
        if (it != bound_.end()) return it->second;
        const Tape::NodeId id = tape_.leaf_ref(&store_->at(name).value, true);
        bound_.emplace(name, id);
        return id;
    }

    // backward + accumulate leaf gradients (scaled) into the store.
    void backward_accumulate(Tape::NodeId loss, double scale = 1.0) {
        tape_.backward(loss);
        for (const auto& [name, id] : bound_) {
            const Matrix& g = tape_.grad(id);
            if (g.a.empty()) continue;
            Matrix& acc = store_->at(name).grad;
            for (std::size_t i = 0; i < g.a.size(); ++i) acc.a[i] += scale * g.a[i];
        }
        store_->grads_populated = true;
    }

private:
    Tape tape_;
    ParamStore* store_;
    std::unordered_map<std::string, Tape::NodeId> bound_;
};

// ---------------------------------------------------------------------------
// Checkpoint io: a one-line JSON header (format version, architecture config,
// tensor shapes) followed by raw little-endian float64 blobs in header order.
// ---------------------------------------------------------------------------
inline constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const ParamStore& store, const nlohmann::json& config, const std::string& path) {
    nlohmann::json header;
    header["format"] = "jsls-checkpoint";
    header["format_version"] = kCheckpointVersion;
    header["config"] = config;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& name : store.order) {
        const auto& e = store.at(name);
        tensors.push_back({{"name", name}, {"rows", e.value.rows}, {"cols", e.value.cols}});
    }
    header["tensors"] = tensors;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_checkpoint: cannot open " + path);
    out << header.dump() << "\n";
    for (const auto& name : store.order) {
        const auto& v = store.at(name).value;
        out.write(reinterpret_cast<const char*>(v.a.data()),
                  static_cast<std::streamsize>(v.a.size() * sizeof(double)));
    }
    if (!out) throw Error("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
    ParamStore store;
    nlohmann::json config;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError(CheckpointError::Kind::CorruptFile, "cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw CheckpointError(CheckpointError::Kind::CorruptFile, "missing header");
    nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.contains("format_version") || !header.contains("tensors")) {
        throw CheckpointError(CheckpointError::Kind::CorruptFile, "unreadable header");
    }
    if (header["format_version"] != kCheckpointVersion) {
        throw CheckpointError(CheckpointError::Kind::VersionMismatch,
                              "unsupported checkpoint version " + header["format_version"].dump());
    }
    Checkpoint ckpt;
    ckpt.config = header.value("config", nlohmann::json::object());
    for (const auto& t : header["tensors"]) {
        const std::string name = t.at("name").get<std::string>();
        const int rows = t.at("rows").get<int>();
        const int cols = t.at("cols").get<int>();
        if (rows < 1 || cols < 1) throw CheckpointError(CheckpointError::Kind::CorruptFile, "bad tensor shape");
        Matrix v(rows, cols);
        in.read(reinterpret_cast<char*>(v.a.data()), static_cast<std::streamsize>(v.a.size() * sizeof(double)));
        if (!in) {
            throw CheckpointError(CheckpointError::Kind::CorruptFile, "truncated tensor data for " + name);
        }
        ckpt.store.add(name, std::move(v));
    }
    char extra;
    if (in.read(&extra, 1)) {
        throw CheckpointError(CheckpointError::Kind::CorruptFile, "trailing bytes after tensor data");
    }
    return ckpt;
}

}  // namespace engine
}  // namespace jsls
