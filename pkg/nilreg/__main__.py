from nilreg.main import main

raise SystemExit(main())
