/** Gradient penalty: penalizes the critic's input-gradient norm away from 1
 * along random points of the segments between real and generated samples. */

import * as tf from '@tensorflow/tfjs';

export function interpolate(
  real: tf.Tensor4D, fake: tf.Tensor4D, t: tf.Tensor1D,
): tf.Tensor4D {
  if (real.shape.join() !== fake.shape.join()) {
    throw new Error(`batch shapes differ: ${real.shape} vs ${fake.shape}`);
  }
  const tb = t.reshape([-1, 1, 1, 1]);
  return tf.add(tf.mul(tb, real), tf.mul(tf.sub(1, tb), fake)) as tf.Tensor4D;
}

/** lambda * mean((||grad_x D(x_hat)||_2 - 1)^2) over the batch. */
export function gradientPenalty(
  critic: (x: tf.Tensor4D) => tf.Tensor1D,
  real: tf.Tensor4D,
  fake: tf.Tensor4D,
  lambda: number,
  t: tf.Tensor1D,
): tf.Scalar {
  const xhat = interpolate(real, fake, t);
  const gradFn = tf.grad((x: tf.Tensor) => tf.sum(critic(x as tf.Tensor4D)));
  const grads = gradFn(xhat);
  const norms = tf.sqrt(tf.sum(tf.square(grads), [1, 2, 3]));
  return tf.mul(lambda, tf.mean(tf.square(tf.sub(norms, 1)))) as tf.Scalar;
}
