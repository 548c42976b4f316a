"""Part-disentangled 3D point-cloud GAN with a multi-rooted tree-convolution generator."""

__version__ = "0.1.0"
