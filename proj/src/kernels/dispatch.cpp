#include "plid/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "plid/errors.hpp"

namespace plid::kernels {

namespace {

constexpr KernelTable scalar_table{&scalar::dot, &scalar::axpy, &scalar::mul_acc, &scalar::add, &scalar::scale};
constexpr KernelTable avx2_table{&avx2::dot, &avx2::axpy, &avx2::mul_acc, &avx2::add, &avx2::scale};

Isa detect()
{
	const char *force = std::getenv("PLID_FORCE_SCALAR");
	if (force != nullptr && std::strcmp(force, "0") != 0 && force[0] != '\0')
		return Isa::scalar;
	return cpu_supports(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa> &current()
{
	static std::atomic<Isa> isa{detect()};
	return isa;
}

} // namespace

bool cpu_supports(Isa isa)
{
	switch (isa) {
	case Isa::scalar:
		return true;
	case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
		return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
		return false;
#endif
	}
	return false;
}

const KernelTable &table(Isa isa)
{
	return isa == Isa::avx2 ? avx2_table : scalar_table;
}

const KernelTable &active()
{
	return table(current().load(std::memory_order_relaxed));
}

Isa active_isa()
{
	return current().load(std::memory_order_relaxed);
}

std::string_view isa_name(Isa isa)
{
	return isa == Isa::avx2 ? "avx2" : "scalar";
}

void force_isa(Isa isa)
{
	if (!cpu_supports(isa))
		throw Error("kernel ISA not supported on this CPU: " + std::string(isa_name(isa)));
	current().store(isa, std::memory_order_relaxed);
}

} // namespace plid::kernels
