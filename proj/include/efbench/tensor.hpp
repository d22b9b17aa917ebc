#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace efbench {

using Shape = std::vector<Eigen::Index>;

inline Eigen::Index shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), Eigen::Index{1},
                           [](Eigen::Index a, Eigen::Index b) { return a * b; });
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major n-dimensional array. Storage is an Eigen column vector so
/// the whole buffer, or its trailing-axis matrix view, can take part in Eigen
/// expressions without copies.
template <typename Scalar>
class BasicTensor {
  public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MatrixMap = Eigen::Map<RowMatrix>;
    using ConstMatrixMap = Eigen::Map<const RowMatrix>;

    BasicTensor() = default;

    explicit BasicTensor(Shape shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(Vector::Constant(shape_size(shape_), fill)) {
        for (auto d : shape_)
            if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape_));
    }

    BasicTensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (shape_size(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    BasicTensor(Shape shape, std::initializer_list<Scalar> values)
        : BasicTensor(std::move(shape), Vector(Eigen::Map<const Vector>(
                                            values.begin(), static_cast<Eigen::Index>(values.size())))) {}

    /// Construction from external input: rejects NaN and infinities.
    static BasicTensor from_values(Shape shape, const std::vector<Scalar>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            if (!std::isfinite(static_cast<double>(values[i])))
                throw std::invalid_argument("non-finite value at flat index " + std::to_string(i));
        Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
        return BasicTensor(std::move(shape), std::move(v));
    }

    const Shape& shape() const { return shape_; }
    Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
    Eigen::Index dim(Eigen::Index axis) const {
        if (axis < 0) axis += rank();
        return shape_.at(static_cast<std::size_t>(axis));
    }
    Eigen::Index size() const { return data_.size(); }
    bool empty() const { return data_.size() == 0; }

    Scalar* data() { return data_.data(); }
    const Scalar* data() const { return data_.data(); }
    Vector& vec() { return data_; }
    const Vector& vec() const { return data_; }

    Scalar& operator[](Eigen::Index i) { return data_[i]; }
    Scalar operator[](Eigen::Index i) const { return data_[i]; }

    /// Rows are the product of all leading axes, columns the trailing axis.
    Eigen::Index rows() const { return shape_.empty() ? 1 : size() / std::max<Eigen::Index>(cols(), 1); }
    Eigen::Index cols() const { return shape_.empty() ? 1 : shape_.back(); }
    MatrixMap matrix() { return MatrixMap(data_.data(), rows(), cols()); }
    ConstMatrixMap matrix() const { return ConstMatrixMap(data_.data(), rows(), cols()); }

    BasicTensor reshaped(Shape shape) const {
        if (shape_size(shape) != size())
            throw ShapeError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(shape));
        return BasicTensor(std::move(shape), data_);
    }

    bool all_finite() const { return data_.allFinite(); }

    bool operator==(const BasicTensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

  private:
    Shape shape_;
    Vector data_;
};

using Tensor = BasicTensor<double>;

}  // namespace efbench
