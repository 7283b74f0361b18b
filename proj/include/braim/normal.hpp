#pragma once

namespace braim {

// Standard normal tail probability Q(x) = P(N(0,1) > x).
double q_func(double x);

// Inverse of q_func on (0, 1).
double q_inv(double p);

double log_normal_pdf(double x, double mean, double var);

// log(exp(a) + exp(b)) without overflow; -inf is the identity.
double log_add(double a, double b);

}  // namespace braim
