#include <gtest/gtest.h>

#include <cmath>

#include "mans/errors.hpp"
#include "mans/ops.hpp"
#include "mans/tensor.hpp"

namespace mans {
namespace {

TEST(Tensor, ShapeAndFill) {
  Tensor<double> t(Shape{2, 3}, 1.5);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(shape_string(t.shape()), "[2x3]");
  for (double v : t.data()) EXPECT_EQ(v, 1.5);
  EXPECT_FALSE(t.requires_grad());
  EXPECT_FALSE(t.has_grad());
}

TEST(Tensor, RejectsEmptyAndMismatchedShapes) {
  EXPECT_THROW(Tensor<float>(Shape{}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{3, 0}), DimensionError);
  EXPECT_THROW(Tensor<float>(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
}

TEST(Tensor, HandlesShareStorageAndCloneDoesNot) {
  Tensor<double> a(Shape{2}, 1.0);
  Tensor<double> b = a;
  b.data()[0] = 5.0;
  EXPECT_EQ(a.data()[0], 5.0);
  EXPECT_TRUE(a.same_storage(b));
  Tensor<double> c = a.clone();
  c.data()[0] = -1.0;
  EXPECT_EQ(a.data()[0], 5.0);
  EXPECT_FALSE(a.same_storage(c));
}

TEST(Tensor, ItemNeedsOneElement) {
  EXPECT_EQ(Tensor<double>::scalar(2.5).item(), 2.5);
  EXPECT_THROW(Tensor<double>(Shape{2}).item(), ArgumentError);
}

TEST(Backward, IdentityRootGetsUnitGradient) {
  Tensor<double> x = Tensor<double>::scalar(3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  tape.backward(x);
  EXPECT_EQ(x.grad()[0], 1.0);
}

TEST(Backward, ReusedOperandAccumulates) {
  Tensor<double> x = Tensor<double>::scalar(3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto y = ops::add(tape, x, x);
  tape.backward(y);
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Backward, DiamondGraphAccumulatesAlongBothPaths) {
  Tensor<double> x = Tensor<double>::scalar(0.7);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto a = ops::mul(tape, x, x);         // x^2
  auto b = ops::sigmoid(tape, x);        // s(x)
  auto y = ops::mul(tape, a, b);         // x^2 s(x)
  tape.backward(y);
  const double s = 1.0 / (1.0 + std::exp(-0.7));
  EXPECT_NEAR(x.grad()[0], 2 * 0.7 * s + 0.49 * s * (1 - s), 1e-15);
}

TEST(Backward, NonScalarRootIsRejected) {
  Tensor<double> x(Shape{2}, 1.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  auto y = ops::add(tape, x, x);
  EXPECT_THROW(tape.backward(y), ArgumentError);
}

TEST(Backward, RootOffTheTapeIsRejected) {
  Tensor<double> x = Tensor<double>::scalar(1.0);
  Tape<double> tape;
  EXPECT_THROW(tape.backward(x), ArgumentError);
}

TEST(Backward, NonRecordingTapeRecordsNothing) {
  Tensor<double> x(Shape{3}, 1.0);
  x.set_requires_grad(true);
  Tape<double> tape(false);
  auto y = ops::sum(tape, ops::relu(tape, x));
  EXPECT_EQ(tape.size(), 0u);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Backward, OperandsWithoutGradientAreSkipped) {
  Tensor<double> w(Shape{2}, 2.0);
  w.set_requires_grad(true);
  Tensor<double> data(Shape{2}, 3.0);
  Tape<double> tape;
  auto y = ops::sum(tape, ops::mul(tape, w, data));
  tape.backward(y);
  EXPECT_EQ(w.grad()[0], 3.0);
  EXPECT_FALSE(data.has_grad());
}

TEST(Backward, InjectedFaultScalesOnlyTheChosenOperand) {
  Tensor<double> a(Shape{2}, 2.0), b(Shape{2}, 5.0);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tape<double> tape;
  tape.inject_fault({"mul", 1, 1.5});
  auto y = ops::sum(tape, ops::mul(tape, a, b));
  tape.backward(y);
  EXPECT_EQ(a.grad()[0], 5.0);
  EXPECT_EQ(b.grad()[0], 3.0);
}

TEST(Tape, FindsFirstNonFiniteNode) {
  Tensor<double> x(Shape{2}, std::numeric_limits<double>::infinity());
  x.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> one(Shape{2}, 1.0);
  one.set_requires_grad(true);
  auto y = ops::add(tape, one, one);
  auto z = ops::add(tape, x, y);
  ASSERT_TRUE(tape.first_non_finite().has_value());
  EXPECT_EQ(*tape.first_non_finite(), 1u);
  EXPECT_EQ(tape.nodes()[1].op, "add");
  (void)z;
}

}  // namespace
}  // namespace mans
