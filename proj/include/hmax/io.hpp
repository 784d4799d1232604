#ifndef HMAX_IO_HPP
#define HMAX_IO_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hmax/lattice.hpp"
#include "hmax/maximal.hpp"

// On-disk formats. Field container: one text header line
//   HMAXFIELD v1 n=<n> lo=<d ints> hi=<d ints> dtype=f64
// followed by volume(window) 8-byte little-endian IEEE-754 values in
// row-major order, last axis fastest. Maximal fields append
// alpha=<hexfloat> mu=<int> mode=<exact|dyadic> to the header; the
// plain-field reader skips unknown trailing tokens. Rectangle lists
// are text: one rectangle per line as "lo_1 .. lo_d hi_1 .. hi_d",
// '#' starts a comment, blank lines are skipped.

namespace hmax {

void write_field(std::ostream& os, const ScalarField& f);
ScalarField read_field(std::istream& is);

void write_maximal_field(std::ostream& os, const MaximalField& m);
MaximalField read_maximal_field(std::istream& is);

void write_rects(std::ostream& os, std::span<const Rect> rects);
std::vector<Rect> read_rects(std::istream& is);

ScalarField read_field_file(const std::string& path);
void write_field_file(const std::string& path, const ScalarField& f);
MaximalField read_maximal_field_file(const std::string& path);
void write_maximal_field_file(const std::string& path, const MaximalField& m);
std::vector<Rect> read_rects_file(const std::string& path);

}  // namespace hmax

#endif  // HMAX_IO_HPP
