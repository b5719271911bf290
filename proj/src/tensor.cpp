#include "radseq/tensor.hpp"

namespace radseq {

std::string shape_string(const Shape& shape) {
    if (shape.empty()) return "(scalar)";
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += 'x';
        s += std::to_string(shape[i]);
    }
    return s;
}

std::size_t shape_volume(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

}  // namespace radseq
