"""adcsim: micro-satellite attitude determination and control simulation stack."""

__version__ = "0.1.0"
