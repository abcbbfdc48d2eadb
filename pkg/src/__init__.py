"""ssmkit - analytical surrogate safety measures for kinematic and force-balance vehicle models."""
