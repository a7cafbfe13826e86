#pragma once

#include <cstddef>

// Dense double-precision inner loops used by the tensor layer.
// Scalar reference implementations always exist; on x86 an AVX2+FMA
// variant is selected at runtime when the CPU supports it. The two
// paths are equivalence-tested against each other.

namespace cria::kernels {

enum class Isa { scalar, avx2, neon };

// ISA the dispatcher resolved to at process start.
Isa active_isa();
const char* isa_name(Isa isa);

// c = a . b
double dot(const double* a, const double* b, std::size_t n);

// C(MxN) = A(MxK) * B(KxN), row-major. accumulate=false zeroes C first.
void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C(MxN) = A(MxK) * B(NxK)^T
void matmul_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
// C(MxN) = A(KxM)^T * B(KxN)
void matmul_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);

void add(double* out, const double* a, const double* b, std::size_t n);
void sub(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
// out += s * a
void axpy(double* out, const double* a, double s, std::size_t n);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void matmul_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate);
void add(double* out, const double* a, const double* b, std::size_t n);
void sub(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
void axpy(double* out, const double* a, double s, std::size_t n);
}  // namespace scalar

}  // namespace cria::kernels
