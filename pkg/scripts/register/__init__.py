"""Ion register model: chain geometry, transition frequencies and pulse dynamics."""
