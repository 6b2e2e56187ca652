"""Losses, optimizers and training loops for GAN, BEGAN and VAC+GAN schemes."""

from vacgan.training.losses import (
    BCE_EPS,
    BeganState,
    VacGanWeights,
    autoencoder_loss,
    bce,
    began_discriminator_loss,
    began_k_update,
    convergence_measure,
    gan_discriminator_loss,
    gan_generator_loss,
    vacgan_generator_loss,
)
from vacgan.training.loop import (
    BEGAN_FAMILY,
    SCHEMES,
    Networks,
    OptimizerSettings,
    StepRecord,
    TrainConfig,
    TrainedBundle,
    TrainState,
    build_networks,
    discriminator_loss,
    generate,
    generator_input,
    generator_loss,
    history_to_csv,
    initial_state,
    step_classifier,
    step_discriminator,
    step_generator,
    train,
)
from vacgan.training.optim import OptimizerState, adam, nesterov

__all__ = [
    "BCE_EPS", "BEGAN_FAMILY", "SCHEMES", "BeganState", "Networks", "OptimizerSettings", "OptimizerState",
    "StepRecord", "TrainConfig", "TrainState", "TrainedBundle", "VacGanWeights", "adam", "autoencoder_loss",
    "bce", "began_k_update", "build_networks", "convergence_measure", "discriminator_loss", "generate",
    "generator_input", "generator_loss", "history_to_csv", "initial_state", "nesterov", "step_classifier",
    "step_discriminator", "step_generator", "train", "began_discriminator_loss", "gan_discriminator_loss",
    "gan_generator_loss", "vacgan_generator_loss",
]
