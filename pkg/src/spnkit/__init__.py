"""Camera fingerprinting from sensor pattern noise.

Extract per-sensor noise fingerprints from images, harden them (odd/even
splitting, block weighting, burst integration, binary quantization), and
bind photos to their source camera through a fuzzy-extractor signature
scheme and a proof-statement check, with a synthetic sensor fleet for
end-to-end validation.
"""

__version__ = "0.1.0"
