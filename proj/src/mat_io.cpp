#include "plid/mat_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "plid/errors.hpp"

namespace plid::mat_io {

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t> &out, U v)
{
	for (std::size_t i = 0; i < sizeof(U); ++i)
		out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const std::uint8_t *p)
{
	U v = 0;
	for (std::size_t i = 0; i < sizeof(U); ++i)
		v |= static_cast<U>(p[i]) << (8 * i);
	return v;
}

} // namespace

std::vector<std::uint8_t> encode(const Matrix &m, Precision precision)
{
	if (m.rows() > std::numeric_limits<std::uint32_t>::max() || m.cols() > std::numeric_limits<std::uint32_t>::max())
		throw ShapeError("matrix too large for container");
	const std::size_t width = precision == Precision::f32 ? 4 : 8;
	std::vector<std::uint8_t> out;
	out.reserve(16 + m.size() * width);
	const char *magic = precision == Precision::f32 ? magic_f32 : magic_f64;
	out.insert(out.end(), magic, magic + 8);
	put_le(out, static_cast<std::uint32_t>(m.rows()));
	put_le(out, static_cast<std::uint32_t>(m.cols()));
	for (double v : m.values()) {
		if (precision == Precision::f32)
			put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
		else
			put_le(out, std::bit_cast<std::uint64_t>(v));
	}
	return out;
}

Matrix decode(const std::vector<std::uint8_t> &bytes, const std::string &what)
{
	if (bytes.size() < 16)
		throw ValidationError(what + ": truncated matrix header");
	std::size_t width = 0;
	if (std::memcmp(bytes.data(), magic_f32, 8) == 0)
		width = 4;
	else if (std::memcmp(bytes.data(), magic_f64, 8) == 0)
		width = 8;
	else
		throw ValidationError(what + ": bad matrix magic");
	const auto rows = get_le<std::uint32_t>(bytes.data() + 8);
	const auto cols = get_le<std::uint32_t>(bytes.data() + 12);
	const std::size_t count = static_cast<std::size_t>(rows) * cols;
	if (bytes.size() != 16 + count * width)
		throw ValidationError(what + ": payload size does not match " + std::to_string(rows) + "x" + std::to_string(cols));
	std::vector<double> values(count);
	const std::uint8_t *p = bytes.data() + 16;
	for (std::size_t i = 0; i < count; ++i, p += width) {
		if (width == 4)
			values[i] = std::bit_cast<float>(get_le<std::uint32_t>(p));
		else
			values[i] = std::bit_cast<double>(get_le<std::uint64_t>(p));
	}
	return Matrix(rows, cols, std::move(values));
}

void write(const std::filesystem::path &path, const Matrix &m, Precision precision)
{
	const auto bytes = encode(m, precision);
	std::ofstream os(path, std::ios::binary | std::ios::trunc);
	if (!os)
		throw LoadError("cannot write " + path.string());
	os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Matrix read(const std::filesystem::path &path)
{
	std::ifstream is(path, std::ios::binary);
	if (!is)
		throw LoadError("missing matrix file: " + path.string());
	std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
	return decode(bytes, path.string());
}

} // namespace plid::mat_io
