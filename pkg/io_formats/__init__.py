"""On-disk formats: PFM depth, PNG masks and images, camera JSON, manifests."""
