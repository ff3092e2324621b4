// Copyright 2026 The lrtomo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <complex>
#include <cstdint>
#include <exception>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lrtomo {

inline constexpr const char *kVersion = "0.1.0";

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class InvalidRank : public Error {
  public:
    using Error::Error;
};

class InvalidBasis : public Error {
  public:
    using Error::Error;
};

class InvalidLabel : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class InvalidState : public Error {
  public:
    using Error::Error;
};

/// The (r+1)-th eigenvalue of a state exceeds the rank tolerance.
class RankMismatch : public Error {
  public:
    RankMismatch(const std::string &what, double eigenvalue)
        : Error(what), eigenvalue_(eigenvalue) {}
    double eigenvalue() const noexcept { return eigenvalue_; }

  private:
    double eigenvalue_;
};

class OutOfModel : public Error {
  public:
    OutOfModel(const std::string &what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

  private:
    double min_eigenvalue_;
};

/// An outcome has (numerically) zero probability but a nonzero gradient.
class BoundarySingularity : public Error {
  public:
    BoundarySingularity(const std::string &what, int outcome)
        : Error(what), outcome_(outcome) {}
    int outcome() const noexcept { return outcome_; }

  private:
    int outcome_;
};

class SingularState : public Error {
  public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
  public:
    using Error::Error;
};

class NumericalFailure : public Error {
  public:
    NumericalFailure(const std::string &what, int iteration)
        : Error(what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

  private:
    int iteration_;
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

namespace detail {

inline std::seed_seq make_seed_seq(std::uint64_t seed, std::initializer_list<std::uint64_t> stream) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * stream.size());
    auto push = [&words](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    for (auto v : stream) push(v);
    return std::seed_seq(words.begin(), words.end());
}

} // namespace detail

/// Engine for the sub-stream `stream` of `seed`. std::seed_seq and
/// std::mt19937_64 are fully specified, so streams are portable.
inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {}) {
    auto seq = detail::make_seed_seq(seed, stream);
    return Rng(seq);
}

/// Counter-based child seed: a pure function of (seed, coordinates).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) {
    auto seq = detail::make_seed_seq(seed, coords);
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

/// Standard complex Gaussian, E|z|^2 = 1.
inline Complex complex_normal(Rng &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double re = normal(rng);
    const double im = normal(rng);
    return {re * M_SQRT1_2, im * M_SQRT1_2};
}

// ---------------------------------------------------------------------------
// Small linear-algebra helpers
// ---------------------------------------------------------------------------

template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived> &m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline CMatrix hermitian_part(const CMatrix &m) { return (m + m.adjoint()) * 0.5; }
inline RMatrix symmetric_part(const RMatrix &m) { return (m + m.transpose()) * 0.5; }

inline double unitarity_defect(const CMatrix &u) {
    return max_abs(u.adjoint() * u - CMatrix::Identity(u.cols(), u.cols()));
}

inline bool is_power_of_two(long d) { return d > 0 && (d & (d - 1)) == 0; }

inline long ipow(long base, int exp) {
    long out = 1;
    for (int i = 0; i < exp; ++i) out *= base;
    return out;
}

// ---------------------------------------------------------------------------
// Parallel helpers
// ---------------------------------------------------------------------------

inline int default_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Results must
/// be written to per-index slots; the first exception (lowest index) is
/// rethrown after all workers join.
template <typename Body>
void parallel_for(std::size_t count, int workers, Body &&body) {
    if (count == 0) return;
    const std::size_t nthreads =
        std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, workers)));
    if (nthreads == 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto &t : pool) t.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

/// Pairwise (tree) sum in a fixed order, so the result does not depend on
/// how the terms were produced.
template <typename T>
T tree_sum(std::vector<T> terms) {
    if (terms.empty()) throw InvalidArgument("tree_sum: no terms");
    while (terms.size() > 1) {
        std::vector<T> next;
        next.reserve((terms.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < terms.size(); i += 2) next.push_back(terms[i] + terms[i + 1]);
        if (terms.size() % 2 == 1) next.push_back(std::move(terms.back()));
        terms = std::move(next);
    }
    return std::move(terms.front());
}

} // namespace lrtomo
