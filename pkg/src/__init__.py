"""srgeodesics core package: geometry, flows, curvatures and criteria."""
