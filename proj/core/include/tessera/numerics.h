/*
 * Copyright 2026 The Tessera Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Dense numerics shared by every model in the library. All arithmetic is
// double precision; matrices are row-major with one sample per row.

#ifndef TESSERA_NUMERICS_H_
#define TESSERA_NUMERICS_H_

#include <Eigen/Dense>
#include <functional>
#include <span>

namespace tessera {

using Vector = Eigen::VectorXd;
using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Numerically stable softmax (max subtraction). Throws DimensionError on an
// empty input.
Vector softmax(const Vector& logits);

// log(sum(exp(values))); -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> values);

// log(1 + exp(x)) without overflow.
double softplus(double x);
double sigmoid(double x);

// Central differences of `f` at `params` with step `h` per coordinate.
// `params` is restored before returning.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f,
                                  Vector params, double h = 1e-5);

// Standard normal CDF and its inverse.
double normal_cdf(double z);
double normal_quantile(double p);

// Rows of `m` selected by `rows`, in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector gather(const Vector& v, std::span<const std::size_t> rows);

}  // namespace tessera

#endif  // TESSERA_NUMERICS_H_
