#include "cria/kernels.hpp"

namespace cria::kernels {

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double*, const double*, std::size_t);
void matmul_nn(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void matmul_nt(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void matmul_tn(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void add(double*, const double*, const double*, std::size_t);
void sub(double*, const double*, const double*, std::size_t);
void mul(double*, const double*, const double*, std::size_t);
void scale(double*, const double*, double, std::size_t);
void axpy(double*, const double*, double, std::size_t);
}  // namespace avx2
#endif
#if defined(__aarch64__)
namespace neon {
double dot(const double*, const double*, std::size_t);
void matmul_nn(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void matmul_nt(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void matmul_tn(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
void add(double*, const double*, const double*, std::size_t);
void sub(double*, const double*, const double*, std::size_t);
void mul(double*, const double*, const double*, std::size_t);
void scale(double*, const double*, double, std::size_t);
void axpy(double*, const double*, double, std::size_t);
}  // namespace neon
#endif

namespace {

struct Vtable {
    Isa isa;
    double (*dot)(const double*, const double*, std::size_t);
    void (*matmul_nn)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
    void (*matmul_nt)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
    void (*matmul_tn)(double*, const double*, const double*, std::size_t, std::size_t, std::size_t, bool);
    void (*add)(double*, const double*, const double*, std::size_t);
    void (*sub)(double*, const double*, const double*, std::size_t);
    void (*mul)(double*, const double*, const double*, std::size_t);
    void (*scale)(double*, const double*, double, std::size_t);
    void (*axpy)(double*, const double*, double, std::size_t);
};

Vtable resolve() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return {Isa::avx2, avx2::dot, avx2::matmul_nn, avx2::matmul_nt, avx2::matmul_tn,
                avx2::add, avx2::sub, avx2::mul, avx2::scale, avx2::axpy};
    }
#endif
#if defined(__aarch64__)
    return {Isa::neon, neon::dot, neon::matmul_nn, neon::matmul_nt, neon::matmul_tn,
            neon::add, neon::sub, neon::mul, neon::scale, neon::axpy};
#endif
    return {Isa::scalar, scalar::dot, scalar::matmul_nn, scalar::matmul_nt, scalar::matmul_tn,
            scalar::add, scalar::sub, scalar::mul, scalar::scale, scalar::axpy};
}

const Vtable& table() {
    static const Vtable t = resolve();
    return t;
}

}  // namespace

Isa active_isa() { return table().isa; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
        default: return "scalar";
    }
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }

void matmul_nn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    table().matmul_nn(c, a, b, m, k, n, acc);
}
void matmul_nt(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    table().matmul_nt(c, a, b, m, k, n, acc);
}
void matmul_tn(double* c, const double* a, const double* b,
               std::size_t m, std::size_t k, std::size_t n, bool acc) {
    table().matmul_tn(c, a, b, m, k, n, acc);
}
void add(double* out, const double* a, const double* b, std::size_t n) { table().add(out, a, b, n); }
void sub(double* out, const double* a, const double* b, std::size_t n) { table().sub(out, a, b, n); }
void mul(double* out, const double* a, const double* b, std::size_t n) { table().mul(out, a, b, n); }
void scale(double* out, const double* a, double s, std::size_t n) { table().scale(out, a, s, n); }
void axpy(double* out, const double* a, double s, std::size_t n) { table().axpy(out, a, s, n); }

}  // namespace cria::kernels
