"""nikudkit: Hebrew diacritization toolkit.

Submodules:

* ``hebrew``   -- codec between dotted text and aligned S/D/N label streams
* ``corpus``   -- manifest loading, chunking, label statistics, tier splits
* ``model``    -- character transformer with three classification heads
* ``checkpoint`` -- portable binary container for model weights
* ``training`` -- warmup/decay schedule, class weights, curriculum loop
* ``metrics``  -- DEC/CHA/WOR/VOC accuracy metrics and reports
* ``pos``      -- POS-tagging transfer harness over the encoder
* ``cli``      -- command-line entry point
"""

__version__ = "0.1.0"
