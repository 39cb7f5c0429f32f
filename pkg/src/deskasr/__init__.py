"""deskasr: desk-scale end-to-end ASR with joint CTC/attention decoding,
external-LM fusion (shallow/cold/deep) and cross-lingual transfer learning,
built on a small numpy autodiff core and verified against enumeration and
finite-difference oracles on synthetic multilingual corpora.
"""

__version__ = "0.1.0"
